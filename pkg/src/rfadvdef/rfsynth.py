"""Baseband frame synthesis for modulation-recognition experiments.

Generates labeled I/Q frames (random bits -> Gray-coded symbols -> RRC pulse
shaping -> unit-power normalization -> AWGN at a target SNR), converts complex
frames to the interleaved real vectors the classifier consumes, and assembles
stratified train/test datasets. Everything is a pure function of
(scheme, snr_db, seed) so datasets are reproducible bit-for-bit.
"""

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

FRAME_LEN = 1024          # complex samples per frame
VECTOR_LEN = 2 * FRAME_LEN
SAMPLES_PER_SYMBOL = 8    # oversampling factor
RRC_ROLLOFF = 0.35
RRC_SPAN = 8              # filter span in symbols

RFDS_MAGIC = b"RFDS"
RFDS_VERSION = 1


class ModScheme(Enum):
    """Supported modulation schemes with their bits per symbol."""

    BPSK = 1
    QPSK = 2
    PSK8 = 3
    QAM16 = 4

    @property
    def bits_per_symbol(self):
        return self.value

    @property
    def constellation(self):
        return _CONSTELLATIONS[self]


def _gray(n):
    return n ^ (n >> 1)


def _build_constellations():
    """Unit-average-energy, Gray-coded constellation tables, indexed by the
    bit word read MSB-first."""
    tables = {}

    tables[ModScheme.BPSK] = np.array([1.0 + 0.0j, -1.0 + 0.0j])

    # QPSK: one bit per rail, (1+1j)/sqrt(2) for bits 00
    qpsk = np.empty(4, dtype=complex)
    for b0 in (0, 1):
        for b1 in (0, 1):
            qpsk[(b0 << 1) | b1] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2.0)
    tables[ModScheme.QPSK] = qpsk

    # 8PSK: phase index k carries the Gray code of k, so neighbors differ by one bit
    psk8 = np.empty(8, dtype=complex)
    for k in range(8):
        psk8[_gray(k)] = np.exp(1j * 2.0 * np.pi * k / 8.0)
    tables[ModScheme.PSK8] = psk8

    # 16QAM: per-axis Gray coding of {-3,-1,+1,+3}, scaled to unit mean energy
    levels = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
    qam = np.empty(16, dtype=complex)
    for word in range(16):
        i_bits = (word >> 2) & 0b11
        q_bits = word & 0b11
        qam[word] = (levels[i_bits] + 1j * levels[q_bits]) / np.sqrt(10.0)
    tables[ModScheme.QAM16] = qam

    return tables


_CONSTELLATIONS = _build_constellations()


@dataclass
class IQFrame:
    """One complex baseband data point of FRAME_LEN samples."""

    samples: np.ndarray   # complex128, length FRAME_LEN
    label: ModScheme
    snr_db: float
    seed: int


@dataclass
class Dataset:
    """Frames as interleaved real vectors plus integer class labels."""

    frames: np.ndarray    # float32 [N, VECTOR_LEN]
    labels: np.ndarray    # uint8 [N]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.frames) != len(self.labels):
            raise ValueError(
                f"frames/labels length mismatch: {len(self.frames)} vs {len(self.labels)}"
            )

    def __len__(self):
        return len(self.frames)


@dataclass
class DatasetSplit:
    train: Dataset
    test: Dataset


def map_symbols(bits, scheme: ModScheme) -> np.ndarray:
    """Map a 0/1 bit sequence onto the scheme's Gray-coded constellation.

    Bit words are read MSB-first. Raises ValueError when the bit count is not
    a multiple of the scheme's bits per symbol.
    """
    bits = np.asarray(bits, dtype=np.int64)
    bps = scheme.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(
            f"bit count {bits.size} not divisible by {bps} ({scheme.name})"
        )
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0 or 1")
    words = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    idx = (words * weights).sum(axis=1)
    return scheme.constellation[idx]


def rrc_taps(beta=RRC_ROLLOFF, sps=SAMPLES_PER_SYMBOL, span=RRC_SPAN) -> np.ndarray:
    """Root-raised-cosine filter taps, unit energy, span*sps+1 samples."""
    n = span * sps
    t = np.arange(-n // 2, n // 2 + 1, dtype=np.float64) / sps
    taps = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            taps[i] = 1.0 - beta + 4.0 * beta / np.pi
        elif abs(abs(ti) - 1.0 / (4.0 * beta)) < 1e-9:
            taps[i] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
            )
        else:
            num = np.sin(np.pi * ti * (1.0 - beta)) + 4.0 * beta * ti * np.cos(
                np.pi * ti * (1.0 + beta)
            )
            den = np.pi * ti * (1.0 - (4.0 * beta * ti) ** 2)
            taps[i] = num / den
    return taps / np.sqrt(np.sum(taps**2))


def synth_frame_parts(scheme: ModScheme, snr_db: float, seed: int):
    """Return (clean, noise) for one frame; synth_frame adds them.

    The clean part is normalized to unit mean power, so the retained noise
    realization gives a direct empirical SNR estimate. Sample index 8*m is the
    center of symbol m.
    """
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    rng = np.random.default_rng(seed)

    sps = SAMPLES_PER_SYMBOL
    n_sym = FRAME_LEN // sps + RRC_SPAN  # margin so every kept sample has full ISI context
    bits = rng.integers(0, 2, n_sym * scheme.bits_per_symbol)
    symbols = map_symbols(bits, scheme)

    upsampled = np.zeros(n_sym * sps, dtype=complex)
    upsampled[::sps] = symbols
    shaped = np.convolve(upsampled, rrc_taps())

    # full convolution peaks for symbol m at index m*sps + span*sps/2;
    # start half a span in so the slice begins on a symbol center
    start = RRC_SPAN * sps // 2 + (RRC_SPAN // 2) * sps
    clean = shaped[start : start + FRAME_LEN]
    clean = clean / np.sqrt(np.mean(np.abs(clean) ** 2))

    noise_power = 10.0 ** (-snr_db / 10.0)
    sigma = np.sqrt(noise_power / 2.0)
    noise = sigma * (rng.standard_normal(FRAME_LEN) + 1j * rng.standard_normal(FRAME_LEN))
    return clean, noise


def synth_frame(scheme: ModScheme, snr_db: float, seed: int) -> IQFrame:
    """Synthesize one labeled frame at the target SNR; deterministic in
    (scheme, snr_db, seed)."""
    clean, noise = synth_frame_parts(scheme, snr_db, seed)
    return IQFrame(samples=clean + noise, label=scheme, snr_db=snr_db, seed=seed)


def interleave(frame) -> np.ndarray:
    """Complex frame -> length-2k real vector {I_1, Q_1, I_2, Q_2, ...}."""
    samples = frame.samples if isinstance(frame, IQFrame) else np.asarray(frame)
    out = np.empty(2 * samples.size, dtype=np.float64)
    out[0::2] = samples.real
    out[1::2] = samples.imag
    return out


def deinterleave(values) -> np.ndarray:
    """Inverse of interleave: length-2k real vector -> k complex samples."""
    values = np.asarray(values)
    if values.size % 2 != 0:
        raise ValueError(f"interleaved vector length must be even, got {values.size}")
    return values[0::2] + 1j * values[1::2]


def _frame_seeds_and_snrs(master_seed, class_index, count, snr_db_range):
    rng = np.random.default_rng(np.random.SeedSequence([int(master_seed), int(class_index)]))
    seeds = rng.integers(0, 2**63 - 1, count)
    snrs = rng.uniform(snr_db_range[0], snr_db_range[1], count)
    return seeds, snrs


def build_dataset(
    schemes,
    snr_db_range=(14.0, 20.0),
    n_per_class=2500,
    n_test_per_class=500,
    seed=0,
) -> DatasetSplit:
    """Build a stratified train/test split of interleaved frames.

    Per-frame SNR is drawn uniformly from snr_db_range; frame seeds derive
    from (seed, class index) so reruns reproduce the split exactly.
    """
    schemes = list(schemes)
    if not schemes:
        raise ValueError("scheme list must not be empty")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")

    def assemble(counts_slice, tag):
        rows, labels = [], []
        for ci, scheme in enumerate(schemes):
            seeds, snrs = _frame_seeds_and_snrs(seed, ci, n_per_class + n_test_per_class,
                                                snr_db_range)
            lo, hi = counts_slice
            for s, snr in zip(seeds[lo:hi], snrs[lo:hi]):
                frame = synth_frame(scheme, float(snr), int(s))
                rows.append(interleave(frame).astype(np.float32))
                labels.append(ci)
        meta = {
            "schemes": [s.name for s in schemes],
            "snr_db_range": [float(snr_db_range[0]), float(snr_db_range[1])],
            "seed": int(seed),
            "split": tag,
        }
        return Dataset(
            frames=np.stack(rows), labels=np.array(labels, dtype=np.uint8), metadata=meta
        )

    train = assemble((0, n_per_class), "train")
    test = assemble((n_per_class, n_per_class + n_test_per_class), "test")
    return DatasetSplit(train=train, test=test)


def save_rfds(path, dataset: Dataset):
    """Write a dataset in the RFDS binary format plus a JSON sidecar."""
    path = Path(path)
    frames = np.ascontiguousarray(dataset.frames, dtype="<f4")
    n, vlen = frames.shape
    with open(path, "wb") as f:
        f.write(RFDS_MAGIC)
        f.write(struct.pack("<III", RFDS_VERSION, n, vlen))
        for row, label in zip(frames, dataset.labels):
            f.write(row.tobytes())
            f.write(struct.pack("B", int(label)))
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w") as f:
        json.dump(dataset.metadata, f, indent=2, sort_keys=True)
        f.write("\n")


def load_rfds(path) -> Dataset:
    """Read an RFDS file (and its JSON sidecar when present)."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != RFDS_MAGIC:
            raise ValueError(f"{path}: not an RFDS file (magic {magic!r})")
        version, n, vlen = struct.unpack("<III", f.read(12))
        if version != RFDS_VERSION:
            raise ValueError(f"{path}: unsupported RFDS version {version}")
        record = np.dtype([("frame", "<f4", (vlen,)), ("label", "u1")])
        body = np.frombuffer(f.read(), dtype=record, count=n)
    frames = np.ascontiguousarray(body["frame"], dtype=np.float32)
    labels = np.ascontiguousarray(body["label"], dtype=np.uint8)
    metadata = {}
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        with open(sidecar) as f:
            metadata = json.load(f)
    return Dataset(frames=frames, labels=labels, metadata=metadata)
