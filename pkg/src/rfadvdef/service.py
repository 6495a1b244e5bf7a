"""FastAPI service exposing the experiment pipeline.

One POST endpoint per stage; the request body is the full experiment config
(validated by pydantic, unknown fields rejected with their path). Stages run
synchronously and write artifacts under the config's out_dir on the server's
filesystem, so the default deployment is a local service or the in-process
transport the CLI uses.
"""

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__, pipeline
from .config import ExperimentConfig
from .training import TrainingDiverged

app = FastAPI(
    title="rf-advdef",
    description="Adversarial-RF workbench: synthesis, training, attacks, "
                "defense, and KS detection",
    version=__version__,
)


class StageResponse(BaseModel):
    stage: str
    config_hash: str
    out_dir: str
    outputs: dict


class HealthResponse(BaseModel):
    status: str
    version: str


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__)


def _run(stage: str, fn, cfg: ExperimentConfig) -> StageResponse:
    try:
        outputs = fn(cfg)
    except pipeline.MissingArtifact as e:
        raise HTTPException(status_code=409, detail=str(e))
    except TrainingDiverged as e:
        raise HTTPException(status_code=500, detail=str(e))
    return StageResponse(stage=stage, config_hash=cfg.config_hash(),
                         out_dir=cfg.out_dir, outputs=outputs)


@app.post("/synth", response_model=StageResponse)
def synth(cfg: ExperimentConfig):
    return _run("synth", pipeline.stage_synth, cfg)


@app.post("/train", response_model=StageResponse)
def train(cfg: ExperimentConfig):
    return _run("train", pipeline.stage_train, cfg)


@app.post("/attack", response_model=StageResponse)
def attack(cfg: ExperimentConfig):
    return _run("attack", pipeline.stage_attack, cfg)


@app.post("/eval", response_model=StageResponse)
def eval_(cfg: ExperimentConfig):
    return _run("eval", pipeline.stage_eval, cfg)


@app.post("/kstest", response_model=StageResponse)
def kstest(cfg: ExperimentConfig):
    return _run("kstest", pipeline.stage_kstest, cfg)


@app.post("/report", response_model=StageResponse)
def report(cfg: ExperimentConfig):
    return _run("report", pipeline.stage_report, cfg)


@app.post("/all", response_model=StageResponse)
def run_all(cfg: ExperimentConfig):
    return _run("all", pipeline.stage_all, cfg)
