import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(x):
    """One step of the splitmix64 output function."""
    x = (int(x) + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def agent_seed(global_seed, agent_id):
    """Seed of agent ``agent_id``'s private stream, derived from ``(global_seed, id)``."""
    return splitmix64(splitmix64(int(global_seed) & _MASK) ^ (int(agent_id) & _MASK))


def agent_rng(global_seed, agent_id):
    return np.random.Generator(np.random.PCG64(agent_seed(global_seed, agent_id)))


def box_muller(rng, size):
    """Standard normal draws from pairs of uniforms."""
    size = int(size)
    k = (size + 1) // 2
    u1 = 1.0 - rng.random(k)  # (0, 1]
    u2 = rng.random(k)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:size]
