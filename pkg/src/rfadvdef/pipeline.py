"""Experiment stages behind the service endpoints.

Each stage reads its inputs from the config's output directory, writes its
artifacts there, and returns a summary dict. Stages are cacheable: training is
the expensive one, so attack/eval/detection variations can rerun against
saved checkpoints. A missing upstream artifact raises MissingArtifact naming
the subcommand that produces it.
"""

import hashlib
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import attacks, ksdetect, models, rfsynth, training
from .attacks import AttackConfig
from .config import ExperimentConfig
from .training import TrainConfig

SURROGATE_SEED_OFFSET = 1000   # independent surrogate: same data, shifted seeds
SIMPLEX_SCHEMES = ["BPSK", "QPSK", "PSK8"]


class MissingArtifact(Exception):
    def __init__(self, path, producer):
        super().__init__(f"missing artifact {path}; run `rf-advdef {producer}` first")
        self.path = str(path)
        self.producer = producer


def _require(path, producer):
    if not Path(path).exists():
        raise MissingArtifact(path, producer)
    return Path(path)


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


class Paths:
    """Artifact naming conventions inside one output directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.root = Path(cfg.out_dir)
        seed = cfg.train.seed
        self.train_rfds = self.root / "train.rfds"
        self.test_rfds = self.root / "test.rfds"
        self.train3_rfds = self.root / "train3.rfds"
        self.test3_rfds = self.root / "test3.rfds"
        self.classical = self.root / f"classical_{seed}.rfwt"
        self.surrogate = self.root / f"surrogate_{seed + SURROGATE_SEED_OFFSET}.rfwt"
        self.autoencoder = self.root / f"autoencoder_{seed}.rfwt"
        self.ae_classifier = self.root / f"ae_classifier_{seed}.rfwt"
        self.adv_trained = self.root / f"adv_trained_{seed}.rfwt"
        self.classical3 = self.root / f"simplex_classical_{seed}.rfwt"
        self.autoencoder3 = self.root / f"simplex_autoencoder_{seed}.rfwt"
        self.ae_classifier3 = self.root / f"simplex_ae_classifier_{seed}.rfwt"


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    t = cfg.train
    return TrainConfig(epochs=t.epochs, batch_size=t.batch_size,
                       learning_rate=t.learning_rate, weight_decay=t.weight_decay,
                       seed=t.seed, adv_eval_epsilon=cfg.attack.epsilon,
                       adv_eval_samples=t.adv_eval_samples)


def _attack_config(cfg: ExperimentConfig) -> AttackConfig:
    a = cfg.attack
    return AttackConfig(epsilon=a.epsilon, steps=a.steps, step_size=a.step_size,
                        targeting=a.targeting, target_class=a.target_class)


def _load_split(train_path, test_path, producer="synth"):
    train = rfsynth.load_rfds(_require(train_path, producer))
    test = rfsynth.load_rfds(_require(test_path, producer))
    return rfsynth.DatasetSplit(train=train, test=test)


def stage_synth(cfg: ExperimentConfig) -> dict:
    """Build and save the stratified train/test RFDS files."""
    p = Paths(cfg)
    p.root.mkdir(parents=True, exist_ok=True)
    d = cfg.dataset
    split = rfsynth.build_dataset(d.scheme_enums(), (d.snr_db_min, d.snr_db_max),
                                  n_per_class=d.train_per_class,
                                  n_test_per_class=d.test_per_class, seed=d.seed)
    rfsynth.save_rfds(p.train_rfds, split.train)
    rfsynth.save_rfds(p.test_rfds, split.test)
    out = {"train": str(p.train_rfds), "test": str(p.test_rfds),
           "train_rows": len(split.train), "test_rows": len(split.test)}
    if cfg.suites.simplex_3class:
        split3 = rfsynth.build_dataset(
            [rfsynth.ModScheme[s] for s in SIMPLEX_SCHEMES],
            (d.snr_db_min, d.snr_db_max), n_per_class=d.train_per_class,
            n_test_per_class=d.test_per_class, seed=d.seed)
        rfsynth.save_rfds(p.train3_rfds, split3.train)
        rfsynth.save_rfds(p.test3_rfds, split3.test)
        out["train3"] = str(p.train3_rfds)
        out["test3"] = str(p.test3_rfds)
    return out


def _train_models(split, tcfg, num_classes, toggles, out_root, tag, chash):
    """Train the enabled regimes on one dataset split; returns summary."""
    summary = {}

    def trace_path(name):
        return out_root / (f"{name}_trace.csv" if not tag else f"{tag}_{name}_trace.csv")

    classical = None
    if toggles["classical"]:
        clf = models.build_classifier(num_classes=num_classes, seed=tcfg.seed)
        classical, trace = training.train_classical(clf, split, tcfg)
        training.write_trace_csv(trace_path("classical"), trace, chash, tcfg.seed)
        summary["classical"] = {"clean_acc": trace[-1].clean_acc,
                                "adv_acc": trace[-1].adv_acc}

    if toggles["greybox"]:
        scfg = replace(tcfg, seed=tcfg.seed + SURROGATE_SEED_OFFSET)
        surr = models.build_classifier(num_classes=num_classes, seed=scfg.seed)
        surr, trace = training.train_classical(surr, split, scfg)
        training.write_trace_csv(trace_path("surrogate"), trace, chash, scfg.seed)
        summary["surrogate"] = {"clean_acc": trace[-1].clean_acc,
                                "adv_acc": trace[-1].adv_acc}
    else:
        surr = None

    ae = ae_clf = None
    if toggles["ae"]:
        proto = classical if classical is not None else models.build_classifier(
            num_classes=num_classes, seed=tcfg.seed)
        ae = models.build_autoencoder(proto, seed=tcfg.seed)
        ae, mse_trace = training.pretrain_autoencoder(ae, split, tcfg)
        training.write_mse_trace_csv(trace_path("ae_pretrain"), mse_trace, chash, tcfg.seed)
        ae_clf, trace = training.train_ae_classifier(ae, split, tcfg, num_classes=num_classes)
        training.write_trace_csv(trace_path("ae_classifier"), trace, chash, tcfg.seed)
        summary["ae_classifier"] = {"clean_acc": trace[-1].clean_acc,
                                    "adv_acc": trace[-1].adv_acc,
                                    "pretrain_mse_first": mse_trace[0][1],
                                    "pretrain_mse_last": mse_trace[-1][1]}
    return summary, classical, surr, ae, ae_clf


def stage_train(cfg: ExperimentConfig) -> dict:
    """Run the enabled training regimes and save checkpoints + trace CSVs."""
    p = Paths(cfg)
    split = _load_split(p.train_rfds, p.test_rfds)
    tcfg = _train_config(cfg)
    chash = cfg.config_hash()
    toggles = cfg.suites.model_dump()
    num_classes = len(cfg.dataset.schemes)

    summary, classical, surr, ae, ae_clf = _train_models(
        split, tcfg, num_classes, toggles, p.root, "", chash)
    if classical is not None:
        models.save_model(classical, p.classical)
    if surr is not None:
        models.save_model(surr, p.surrogate)
    if ae is not None:
        models.save_model(ae, p.autoencoder)
    if ae_clf is not None:
        models.save_model(ae_clf, p.ae_classifier)

    if toggles["adversarial_training"]:
        clf = models.build_classifier(num_classes=num_classes, seed=tcfg.seed)
        adv_model, trace = training.adversarial_train(clf, split, _attack_config(cfg), tcfg)
        training.write_trace_csv(p.root / "adv_trained_trace.csv", trace, chash, tcfg.seed)
        models.save_model(adv_model, p.adv_trained)
        summary["adv_trained"] = {"clean_acc": trace[-1].clean_acc,
                                  "adv_acc": trace[-1].adv_acc}

    if toggles["simplex_3class"]:
        split3 = _load_split(p.train3_rfds, p.test3_rfds)
        toggles3 = {"classical": True, "greybox": False, "ae": True}
        sub, clf3, _, ae3, ae_clf3 = _train_models(
            split3, tcfg, len(SIMPLEX_SCHEMES), toggles3, p.root, "simplex", chash)
        models.save_model(clf3, p.classical3)
        models.save_model(ae3, p.autoencoder3)
        models.save_model(ae_clf3, p.ae_classifier3)
        summary["simplex_3class"] = sub
    return summary


def stage_attack(cfg: ExperimentConfig) -> dict:
    """Craft white-box and grey-box adversarial batches over the test set."""
    p = Paths(cfg)
    test = rfsynth.load_rfds(_require(p.test_rfds, "synth"))
    acfg = _attack_config(cfg)
    summary = {}

    if cfg.suites.classical:
        clf = models.load_model(_require(p.classical, "train"))
        batch = attacks.craft_greybox(clf, clf, test.frames, test.labels, acfg,
                                      crafted_on="classical")
        attacks.save_adversarial_batch(p.root, "attack_whitebox_classical", batch, acfg,
                                       crafted_on_hash=_file_hash(p.classical))
        summary["whitebox_classical_acc"] = batch.victim_accuracy

    if cfg.suites.ae:
        ae_clf = models.load_model(_require(p.ae_classifier, "train"))
        batch = attacks.craft_greybox(ae_clf, ae_clf, test.frames, test.labels, acfg,
                                      crafted_on="ae_classifier")
        attacks.save_adversarial_batch(p.root, "attack_whitebox_ae", batch, acfg,
                                       crafted_on_hash=_file_hash(p.ae_classifier))
        summary["whitebox_ae_acc"] = batch.victim_accuracy

    if cfg.suites.greybox:
        surr = models.load_model(_require(p.surrogate, "train"))
        ae_clf = models.load_model(_require(p.ae_classifier, "train"))
        batch = attacks.craft_greybox(surr, ae_clf, test.frames, test.labels, acfg,
                                      crafted_on="surrogate")
        attacks.save_adversarial_batch(p.root, "attack_greybox", batch, acfg,
                                       crafted_on_hash=_file_hash(p.surrogate))
        summary["greybox_ae_acc"] = batch.victim_accuracy
    return summary


def confusion_matrix(model, frames, labels, num_classes) -> np.ndarray:
    """Row-normalized (true x predicted) confusion matrix."""
    preds = models.predict_probs(model, frames).argmax(axis=1)
    mat = np.zeros((num_classes, num_classes))
    for t, pr in zip(np.asarray(labels), preds):
        mat[int(t), int(pr)] += 1
    rows = mat.sum(axis=1, keepdims=True)
    rows[rows == 0] = 1.0
    return mat / rows


def write_confusion_csv(path, mat, class_names, config_hash="", seed=0):
    with open(path, "w") as f:
        f.write(f"# config_hash={config_hash} seed={seed}\n")
        f.write("true_class," + ",".join(class_names) + "\n")
        for name, row in zip(class_names, mat):
            f.write(name + "," + ",".join(f"{v:.6f}" for v in row) + "\n")


def write_simplex_csv(path, probs, class_names, config_hash="", seed=0):
    with open(path, "w") as f:
        f.write(f"# config_hash={config_hash} seed={seed}\n")
        f.write(",".join(f"p_{n}" for n in class_names) + "\n")
        for row in probs:
            f.write(",".join(f"{v:.6f}" for v in row) + "\n")


def stage_eval(cfg: ExperimentConfig) -> dict:
    """Write confusion matrices (clean/attacked) and simplex probability CSVs."""
    p = Paths(cfg)
    test = rfsynth.load_rfds(_require(p.test_rfds, "synth"))
    names = cfg.dataset.schemes
    chash = cfg.config_hash()
    seed = cfg.train.seed
    n_classes = len(names)
    metrics = {}

    if cfg.suites.classical:
        clf = models.load_model(_require(p.classical, "train"))
        mat = confusion_matrix(clf, test.frames, test.labels, n_classes)
        write_confusion_csv(p.root / "confusion_clean_classical.csv", mat, names, chash, seed)
        metrics["clean_classical_acc"] = float(np.mean(
            models.predict_probs(clf, test.frames).argmax(1) == test.labels))

        adv = attacks.load_adversarial_batch(
            p.root, "attack_whitebox_classical") if (p.root / "attack_whitebox_classical.json").exists() \
            else None
        if adv is None:
            raise MissingArtifact(p.root / "attack_whitebox_classical.json", "attack")
        mat = confusion_matrix(clf, adv.perturbed, adv.true_labels, n_classes)
        write_confusion_csv(p.root / "confusion_fgsm_classical.csv", mat, names, chash, seed)
        metrics["fgsm_classical_acc"] = models.accuracy(clf, adv.perturbed, adv.true_labels)

    if cfg.suites.ae:
        ae_clf = models.load_model(_require(p.ae_classifier, "train"))
        adv = attacks.load_adversarial_batch(
            p.root, "attack_whitebox_ae") if (p.root / "attack_whitebox_ae.json").exists() else None
        if adv is None:
            raise MissingArtifact(p.root / "attack_whitebox_ae.json", "attack")
        mat = confusion_matrix(ae_clf, adv.perturbed, adv.true_labels, n_classes)
        write_confusion_csv(p.root / "confusion_fgsm_ae.csv", mat, names, chash, seed)
        metrics["clean_ae_acc"] = models.accuracy(ae_clf, test.frames, test.labels)
        metrics["fgsm_ae_acc"] = models.accuracy(ae_clf, adv.perturbed, adv.true_labels)

    if cfg.suites.greybox and (p.root / "attack_greybox.json").exists():
        with open(p.root / "attack_greybox.json") as f:
            metrics["greybox_ae_acc"] = json.load(f)["victim_accuracy"]

    if cfg.suites.simplex_3class:
        test3 = rfsynth.load_rfds(_require(p.test3_rfds, "synth"))
        acfg = _attack_config(cfg)
        for tag, ckpt in (("classical", p.classical3), ("ae", p.ae_classifier3)):
            model = models.load_model(_require(ckpt, "train"))
            legit = models.predict_probs(model, test3.frames)
            advb = attacks.fgsm_batch(model, test3.frames, test3.labels.astype(np.int64), acfg)
            advp = models.predict_probs(model, advb)
            write_simplex_csv(p.root / f"simplex_{tag}_legit.csv", legit,
                              SIMPLEX_SCHEMES, chash, seed)
            write_simplex_csv(p.root / f"simplex_{tag}_adv.csv", advp,
                              SIMPLEX_SCHEMES, chash, seed)

    with open(p.root / "eval_metrics.json", "w") as f:
        json.dump({"config_hash": chash, "seed": seed, "metrics": metrics}, f,
                  indent=2, sort_keys=True)
        f.write("\n")
    return metrics


def stage_kstest(cfg: ExperimentConfig) -> dict:
    """KS detection tables for the classical and AE-pretrained classifiers."""
    if not cfg.suites.ks_suite:
        return {"skipped": True}
    p = Paths(cfg)
    test = rfsynth.load_rfds(_require(p.test_rfds, "synth"))
    names = cfg.dataset.schemes
    chash = cfg.config_hash()
    seed = cfg.train.seed
    summary = {}
    jobs = []
    if cfg.suites.classical:
        jobs.append(("classical", p.classical, "attack_whitebox_classical"))
    if cfg.suites.ae:
        jobs.append(("ae", p.ae_classifier, "attack_whitebox_ae"))
    for tag, ckpt, batch_name in jobs:
        model = models.load_model(_require(ckpt, "train"))
        _require(p.root / f"{batch_name}.json", "attack")
        batch = attacks.load_adversarial_batch(p.root, batch_name)
        legit = ksdetect.collect_outputs(model, test.frames, source="legitimate")
        adv = ksdetect.collect_outputs(model, batch.perturbed, source="adversarial")
        report = ksdetect.run_suite(legit, adv, num_classes=len(names), seed=seed)
        ksdetect.write_ks_csv(p.root / f"ks_{tag}.csv", report, names, chash, seed)
        full_p = [report.cells[(c, "full_legit_vs_adv")].p_value
                  for c in range(len(names))
                  if report.cells[(c, "full_legit_vs_adv")] is not None]
        summary[tag] = {"max_full_p": max(full_p) if full_p else None}
    return summary


def stage_report(cfg: ExperimentConfig) -> dict:
    """Aggregate accuracies and KS outcomes into one summary JSON."""
    p = Paths(cfg)
    chash = cfg.config_hash()
    _require(p.root / "eval_metrics.json", "eval")
    with open(p.root / "eval_metrics.json") as f:
        eval_metrics = json.load(f)["metrics"]
    ks = {}
    for tag in ("classical", "ae"):
        path = p.root / f"ks_{tag}.csv"
        if path.exists():
            rows = ksdetect.read_ks_csv(path)
            ks[tag] = [
                {"class": r["class"], "instance": r["instance"],
                 "D": r["result"].statistic_d if r["result"] else None,
                 "p_value": r["result"].p_value if r["result"] else None}
                for r in rows
            ]
    summary = {
        "config_hash": chash,
        "config": cfg.model_dump(),
        "accuracies": eval_metrics,
        "ks": ks,
        "artifacts": sorted(str(q.relative_to(p.root)) for q in p.root.iterdir()),
    }
    with open(p.root / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return {"summary": str(p.root / "summary.json"),
            "accuracies": eval_metrics}


STAGES = {
    "synth": stage_synth,
    "train": stage_train,
    "attack": stage_attack,
    "eval": stage_eval,
    "kstest": stage_kstest,
    "report": stage_report,
}


def stage_all(cfg: ExperimentConfig) -> dict:
    """synth -> train -> attack -> eval -> kstest -> report, end to end."""
    out = {}
    for name in ("synth", "train", "attack", "eval", "kstest", "report"):
        out[name] = STAGES[name](cfg)
    return out
