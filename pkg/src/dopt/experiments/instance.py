"""Instance files: the message envelope reused as a container.

A file is a sequence of length-prefixed frames. The first has kind
``INSTANCE_HEADER`` and one tensor ``[experiment code, N, S]``; then one
``INSTANCE_AGENT`` frame per agent (``sender`` = agent id) with that agent's
data tensors.
"""

import hashlib
import struct
from pathlib import Path

import numpy as np

from .. import comms
from .data import ClassificationData, MicrogridData

EXPERIMENT_CODES = {"logistic": 0, "svm": 1, "microgrid": 2}
_CODE_NAMES = {v: k for k, v in EXPERIMENT_CODES.items()}


class InstanceFileError(ValueError):
    pass


def _agent_tensors(experiment, d):
    if experiment in ("logistic", "svm"):
        return [d.points, d.labels, np.array([d.C])]
    return d.to_tensors()


def _agent_from_tensors(experiment, tensors):
    if experiment in ("logistic", "svm"):
        return ClassificationData(np.array(tensors[0], ndmin=2), np.array(tensors[1]).reshape(-1),
                                  float(tensors[2][0]))
    return MicrogridData.from_tensors(tensors)


def encode_instance(experiment, data):
    if experiment not in EXPERIMENT_CODES:
        raise InstanceFileError("unknown experiment {!r}".format(experiment))
    S = data[0].S if experiment == "microgrid" else 0
    parts = [comms.frame(comms.Message(0, 0, comms.INSTANCE_HEADER,
                                       [np.array([EXPERIMENT_CODES[experiment], len(data), S], dtype=float)]))]
    for i, d in enumerate(data):
        parts.append(comms.frame(comms.Message(i, 0, comms.INSTANCE_AGENT, _agent_tensors(experiment, d))))
    return b"".join(parts)


def decode_instance(blob):
    frames = []
    off = 0
    while off < len(blob):
        if off + 4 > len(blob):
            raise InstanceFileError("truncated frame length at byte {}".format(off))
        (n,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + n > len(blob):
            raise InstanceFileError("truncated frame at byte {}".format(off))
        frames.append(comms.decode(blob[off:off + n]))
        off += n
    if not frames or frames[0].kind != comms.INSTANCE_HEADER:
        raise InstanceFileError("missing instance header")
    code, N, _ = frames[0].payload[0]
    experiment = _CODE_NAMES.get(int(code))
    if experiment is None:
        raise InstanceFileError("unknown experiment code {}".format(code))
    agents = frames[1:]
    if len(agents) != int(N) or [m.sender for m in agents] != list(range(int(N))):
        raise InstanceFileError("expected agent sections 0..{} in order".format(int(N) - 1))
    return experiment, [_agent_from_tensors(experiment, m.payload) for m in agents]


def write_instance(path, experiment, data):
    blob = encode_instance(experiment, data)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_instance(path):
    return decode_instance(Path(path).read_bytes())


def instance_hash(experiment, data):
    return hashlib.sha256(encode_instance(experiment, data)).hexdigest()
