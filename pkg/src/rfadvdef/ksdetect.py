"""Two-sample Kolmogorov-Smirnov detection over classifier softmax outputs.

Each output vector is reduced to the scalar probability of its predicted
class, grouped by predicted class, and compared between legitimate and
adversarial batches in three instances per class: full set vs full set,
random 50 vs random 50, and a legitimate-vs-legitimate control from two
disjoint random 50-subsets. The D statistic comes from an exact merged-ECDF
sweep; the p-value from the asymptotic Kolmogorov series with the standard
small-sample lambda correction.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import models

INSTANCES = ("full_legit_vs_adv", "sampled50_legit_vs_adv", "control_legit_vs_legit")


@dataclass
class OutputSample:
    probs: np.ndarray
    predicted: int
    source: str          # "legitimate" | "adversarial"


@dataclass
class KSResult:
    statistic_d: float
    p_value: float
    n: int
    m: int


@dataclass
class KSReport:
    cells: dict          # (class_index, instance) -> KSResult | None
    num_classes: int
    metadata: dict


def collect_outputs(model, frames, source="legitimate"):
    """One OutputSample per row of frames, in dataset order."""
    if not model.trained:
        raise ValueError("collect_outputs needs a trained model")
    probs = models.predict_probs(model, frames)
    return [
        OutputSample(probs=p, predicted=int(p.argmax()), source=source) for p in probs
    ]


def _ks_p_value(d, n, m):
    """Asymptotic two-sample p-value: Q(lambda) = 2 sum_j (-1)^(j-1) e^(-2 j^2 lambda^2)
    with lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D, ne = n*m/(n+m)."""
    if d <= 0.0:
        return 1.0
    ne = n * m / (n + m)
    lam = (np.sqrt(ne) + 0.12 + 0.11 / np.sqrt(ne)) * d
    if lam < 1e-3:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 100001):
        term = np.exp(-2.0 * (j * lam) ** 2)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
    return float(min(max(2.0 * total, 0.0), 1.0))


def ks_two_sample(a, b) -> KSResult:
    """Exact-sweep two-sample KS statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("ks_two_sample needs nonempty samples")
    merged = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, merged, side="right") / n
    cdf_b = np.searchsorted(b, merged, side="right") / m
    d = float(np.abs(cdf_a - cdf_b).max())
    return KSResult(statistic_d=d, p_value=_ks_p_value(d, n, m), n=n, m=m)


def _scalars_by_class(samples, num_classes):
    """Predicted-class probability of each sample, grouped by predicted class."""
    groups = [[] for _ in range(num_classes)]
    for s in samples:
        groups[s.predicted].append(float(s.probs[s.predicted]))
    return [np.array(g) for g in groups]


def run_suite(legit, adv, num_classes, sample_size=50, seed=0) -> KSReport:
    """Three KS instances per predicted class.

    The control cell needs at least 2*sample_size legitimate outputs in the
    class, else it is marked unavailable (None). Sampled cells draw up to
    sample_size per side without replacement; actual n, m are recorded.
    """
    if not legit or not adv:
        raise ValueError("run_suite needs nonempty legitimate and adversarial sets")
    legit_groups = _scalars_by_class(legit, num_classes)
    adv_groups = _scalars_by_class(adv, num_classes)
    cells = {}
    for c in range(num_classes):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), c]))
        lg, ag = legit_groups[c], adv_groups[c]

        cells[(c, "full_legit_vs_adv")] = (
            ks_two_sample(lg, ag) if len(lg) and len(ag) else None
        )

        if len(lg) and len(ag):
            la = rng.permutation(lg)[: min(sample_size, len(lg))]
            aa = rng.permutation(ag)[: min(sample_size, len(ag))]
            cells[(c, "sampled50_legit_vs_adv")] = ks_two_sample(la, aa)
        else:
            cells[(c, "sampled50_legit_vs_adv")] = None

        if len(lg) >= 2 * sample_size:
            perm = rng.permutation(lg)
            cells[(c, "control_legit_vs_legit")] = ks_two_sample(
                perm[:sample_size], perm[sample_size : 2 * sample_size]
            )
        else:
            cells[(c, "control_legit_vs_legit")] = None
    return KSReport(
        cells=cells,
        num_classes=num_classes,
        metadata={"reduction": "predicted_class_probability", "sample_size": sample_size,
                  "seed": int(seed)},
    )


def write_ks_csv(path, report: KSReport, class_names=None, config_hash="", seed=0):
    """class,instance,D,p_value,n,m rows mirroring the per-class tables."""
    names = class_names or [str(c) for c in range(report.num_classes)]
    with open(path, "w") as f:
        f.write(f"# config_hash={config_hash} seed={seed} "
                f"reduction={report.metadata['reduction']}\n")
        f.write("class,instance,D,p_value,n,m\n")
        for c in range(report.num_classes):
            for inst in INSTANCES:
                r = report.cells.get((c, inst))
                if r is None:
                    f.write(f"{names[c]},{inst},,,,\n")
                else:
                    f.write(f"{names[c]},{inst},{r.statistic_d:.6f},{r.p_value:.6e},"
                            f"{r.n},{r.m}\n")


def read_ks_csv(path):
    """Rows of the KS CSV as dicts (None for unavailable cells)."""
    rows = []
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    for rec in csv.DictReader(lines):
        if rec["D"] == "":
            rows.append({"class": rec["class"], "instance": rec["instance"], "result": None})
        else:
            rows.append({
                "class": rec["class"],
                "instance": rec["instance"],
                "result": KSResult(float(rec["D"]), float(rec["p_value"]),
                                   int(rec["n"]), int(rec["m"])),
            })
    return rows
