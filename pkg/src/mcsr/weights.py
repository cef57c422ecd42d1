"""Named tensor store, its binary serialization, and reproducible random
initialization.

Weight file layout (all integers little-endian):

    magic   5 bytes  b"MCSRW"
    version u32
    count   u32
    then per tensor:
        name length u16, UTF-8 name
        ndim u8, dims u32 each
        float32 payload, row-major

Random initialization draws zero-mean uniforms in [-0.02, 0.02] from a
seeded 64-bit linear congruential generator (high 32 bits of
``x <- 6364136223846793005 * x + 1442695040888963407``), so stores are
byte-reproducible across platforms.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorruptFileError, MissingWeightsError
from .pyramid import num_levels_for
from .swin import STL_PARAM_SHAPES

MAGIC = b"MCSRW"
VERSION = 1
INIT_SCALE = 0.02
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1

BRANCHES = ("tar_lr", "ref_lr", "ref")


class WeightStore:
    """Ordered map from dotted parameter name to a float32 tensor."""

    def __init__(self):
        self._tensors = {}

    def __len__(self):
        return len(self._tensors)

    def __contains__(self, name):
        return name in self._tensors

    def names(self):
        return list(self._tensors)

    def set(self, name, array):
        self._tensors[name] = np.ascontiguousarray(array, dtype=np.float32)

    def get(self, name):
        return self._tensors[name]

    def fetch(self, name):
        """Parameter as float64 for computation; missing names raise."""
        if name not in self._tensors:
            raise MissingWeightsError([name])
        return self._tensors[name].astype(np.float64)

    def require(self, names):
        missing = [name for name in names if name not in self._tensors]
        if missing:
            raise MissingWeightsError(missing)


def save_weights(store, path):
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(store))]
    for name in store.names():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ConfigError(f"tensor name too long: {name!r}")
        tensor = store.get(name)
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", tensor.ndim))
        chunks.extend(struct.pack("<I", dim) for dim in tensor.shape)
        chunks.append(tensor.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path):
    data = Path(path).read_bytes()
    offset = 0

    def take(count, what):
        nonlocal offset
        if offset + count > len(data):
            raise CorruptFileError(f"truncated weight file while reading {what}", offset)
        chunk = data[offset : offset + count]
        offset += count
        return chunk

    if take(5, "magic") != MAGIC:
        raise CorruptFileError("bad magic, not a weight file", 0)
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CorruptFileError(f"unsupported weight file version {version}", 5)
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    store = WeightStore()
    for _ in range(count):
        entry_offset = offset
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptFileError("tensor name is not valid UTF-8", entry_offset) from None
        (ndim,) = struct.unpack("<B", take(1, f"ndim of '{name}'"))
        dims = [
            struct.unpack("<I", take(4, f"dim {d} of '{name}'"))[0] for d in range(ndim)
        ]
        elements = int(np.prod(dims, dtype=np.int64)) if dims else 1
        payload = take(4 * elements, f"payload of '{name}'")
        if name in store:
            raise CorruptFileError(f"duplicate tensor '{name}'", entry_offset)
        store.set(name, np.frombuffer(payload, dtype="<f4").reshape(dims))
    if offset != len(data):
        raise CorruptFileError("trailing bytes after final tensor", offset)
    return store


class Lcg64:
    """The package's portable RNG: 64-bit LCG, outputs the high 32 bits."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_u32(self):
        self.state = (self.state * LCG_MULTIPLIER + LCG_INCREMENT) & _MASK64
        return self.state >> 32

    def uniform(self, shape, low=-INIT_SCALE, high=INIT_SCALE):
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        span = (high - low) / 4294967296.0
        values = np.empty(count)
        for i in range(count):
            values[i] = low + span * self.next_u32()
        return values.reshape(shape)


def _stg_parameter_names(prefix, stg_cfg):
    for i in range(stg_cfg.num_rstb):
        for j in range(stg_cfg.stl_per_rstb):
            stl_cfg = stg_cfg.stl_config(j)
            for suffix, shape_of in STL_PARAM_SHAPES:
                yield f"{prefix}.rstb{i}.stl{j}.{suffix}", shape_of(stl_cfg)
        yield f"{prefix}.rstb{i}.conv.weight", (stg_cfg.embed_dim, stg_cfg.embed_dim, 3, 3)
        yield f"{prefix}.rstb{i}.conv.bias", (stg_cfg.embed_dim,)
    yield f"{prefix}.conv.weight", (stg_cfg.embed_dim, stg_cfg.embed_dim, 3, 3)
    yield f"{prefix}.conv.bias", (stg_cfg.embed_dim,)


def _rstb_parameter_names(prefix, stg_cfg):
    for j in range(stg_cfg.stl_per_rstb):
        stl_cfg = stg_cfg.stl_config(j)
        for suffix, shape_of in STL_PARAM_SHAPES:
            yield f"{prefix}.stl{j}.{suffix}", shape_of(stl_cfg)
    yield f"{prefix}.conv.weight", (stg_cfg.embed_dim, stg_cfg.embed_dim, 3, 3)
    yield f"{prefix}.conv.bias", (stg_cfg.embed_dim,)


def parameter_inventory(cfg, share_branch_stg=False, pyramid_rstb=False):
    """Every (name, shape) the forward pass reads, in a fixed order."""
    channels = cfg.channels
    levels = num_levels_for(cfg.uf)
    names = []
    for branch in BRANCHES:
        names.append((f"shallow.{branch}.weight", (channels, 1, 3, 3)))
        names.append((f"shallow.{branch}.bias", (channels,)))
    stg_keys = ("shared",) if share_branch_stg else BRANCHES
    for key in stg_keys:
        names.extend(_stg_parameter_names(f"stg.{key}", cfg.stg))
    for level in range(levels - 1, 0, -1):
        names.append((f"pyramid.down{level}.weight", (channels, channels, 3, 3)))
        names.append((f"pyramid.down{level}.bias", (channels,)))
        if pyramid_rstb:
            names.extend(_rstb_parameter_names(f"pyramid.rstb{level}", cfg.stg))
    for level in range(1, levels + 1):
        if level > 1:
            names.append((f"mab{level}.sab.up.weight", (channels, channels, 3, 3)))
            names.append((f"mab{level}.sab.up.bias", (channels,)))
        for kind in ("alpha", "beta"):
            names.append((f"mab{level}.sab.{kind}.weight", (channels, 2 * channels, 3, 3)))
            names.append((f"mab{level}.sab.{kind}.bias", (channels,)))
        for kind in ("down", "ta", "tb"):
            names.append((f"mab{level}.jrfab.{kind}.weight", (channels, channels, 3, 3)))
            names.append((f"mab{level}.jrfab.{kind}.bias", (channels,)))
        names.append((f"mab{level}.jrfab.fuse.weight", (channels, 2 * channels, 3, 3)))
        names.append((f"mab{level}.jrfab.fuse.bias", (channels,)))
    names.append(("head.weight", (1, channels, 3, 3)))
    names.append(("head.bias", (1,)))
    return names


def init_random_weights(cfg, seed=None, share_branch_stg=False, pyramid_rstb=False):
    """Seeded store covering the full inventory, uniform in [-0.02, 0.02]."""
    rng = Lcg64(cfg.seed if seed is None else seed)
    store = WeightStore()
    for name, shape in parameter_inventory(cfg, share_branch_stg, pyramid_rstb):
        store.set(name, rng.uniform(shape))
    return store
