"""Pipeline configuration: JSON schema, loading, and workspace layout.

The config file is a single JSON object; every key is optional except
city and bbox. The global seed propagates into the split, the synth
generator, jitter probes, and mock-model noise unless a section pins its
own. See README for the full schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import GbrtConfig, KnnConfig
from .errors import ConfigError
from .gateway import ModelConfig
from .geo import BBox
from .retrieval.types import Mode, RetrievalConfig
from .sampling import SplitConfig
from .tasks import DEFAULT_TASK_KEYS, get_task


@dataclass
class PipelineConfig:
    city: str
    bbox: BBox
    workdir: Path
    tasks: tuple[str, ...] = DEFAULT_TASK_KEYS
    seed: int = 0
    split: SplitConfig = field(default_factory=SplitConfig)
    retrieval: RetrievalConfig = None
    model: ModelConfig = field(default_factory=ModelConfig)
    synth: dict = field(default_factory=dict)
    min_bin_values: int = 100
    scales_path: Path | None = None      # reuse scales fitted elsewhere
    knn: KnnConfig = field(default_factory=KnnConfig)
    gbrt: GbrtConfig = field(default_factory=GbrtConfig)
    baseline_space: str = "bin"          # targets for the shallow baselines
    ablation_task: str = "population"
    answer_stage_images: bool = True

    def __post_init__(self):
        self.workdir = Path(self.workdir)
        if self.retrieval is None:
            self.retrieval = RetrievalConfig(cache_dir=self.workdir / "cache")

    def task_objects(self):
        return [get_task(k) for k in self.tasks]


class Workspace:
    """File layout of one pipeline run; stages talk only through these."""

    def __init__(self, workdir: Path):
        self.root = Path(workdir)
        self.points = self.root / "points.jsonl"
        self.truths = self.root / "truths.json"
        self.order = self.root / "order.json"
        self.splits = self.root / "splits.json"
        self.scales = self.root / "scales.json"
        self.dataset = self.root / "dataset.jsonl"
        self.exclusions = self.root / "exclusions.jsonl"
        self.predictions = self.root / "predictions.jsonl"
        self.baselines = self.root / "baselines.jsonl"
        self.cache_dir = self.root / "cache"
        self.models_dir = self.root / "models"
        self.results_dir = self.root / "results"
        self.figures_dir = self.results_dir / "figures"
        self.transcripts_dir = self.root / "transcripts"
        self.manifests_dir = self.root / "manifests"

    def manifest(self, stage: str) -> Path:
        return self.manifests_dir / f"{stage}.json"

    def rel(self, path: Path) -> str:
        return str(Path(path).relative_to(self.root))


def _build_bbox(raw) -> BBox:
    if isinstance(raw, dict):
        try:
            return BBox(raw["min_lat"], raw["max_lat"], raw["min_lon"], raw["max_lon"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"invalid bbox: {e}") from e
    if isinstance(raw, (list, tuple)) and len(raw) == 4:
        return BBox(*raw)
    raise ConfigError("bbox must be {min_lat, max_lat, min_lon, max_lon} or a 4-list")


def load_config(path: Path, seed: int | None = None, mode: str | None = None) -> PipelineConfig:
    """Load and validate a pipeline config; seed/mode override the file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key in ("city", "bbox"):
        if key not in raw:
            raise ConfigError(f"config missing required key {key!r}")

    base_dir = path.parent
    the_seed = int(seed if seed is not None else raw.get("seed", 0))
    workdir = Path(raw.get("workdir", f"runs/{raw['city']}"))
    if not workdir.is_absolute():
        workdir = base_dir / workdir

    tasks = tuple(raw.get("tasks", DEFAULT_TASK_KEYS))
    for t in tasks:
        get_task(t)

    split_raw = raw.get("split", {})
    try:
        split = SplitConfig(train_frac=split_raw.get("train", 0.6),
                            val_frac=split_raw.get("val", 0.1),
                            test_frac=split_raw.get("test", 0.3),
                            seed=split_raw.get("seed", the_seed))
    except TypeError as e:
        raise ConfigError(f"invalid split section: {e}") from e

    retr_raw = dict(raw.get("retrieval", {}))
    retr_raw.setdefault("cache_dir", workdir / "cache")
    if mode is not None:
        retr_raw["mode"] = mode
    elif "mode" not in retr_raw:
        retr_raw["mode"] = Mode.REPLAY
    try:
        retrieval = RetrievalConfig(**retr_raw)
    except TypeError as e:
        raise ConfigError(f"invalid retrieval section: {e}") from e

    model_raw = dict(raw.get("model", {}))
    model_raw.setdefault("seed", the_seed)
    try:
        model = ModelConfig(**model_raw)
    except TypeError as e:
        raise ConfigError(f"invalid model section: {e}") from e

    baselines_raw = raw.get("baselines", {})
    try:
        knn = KnnConfig(**baselines_raw.get("knn", {}))
        gbrt = GbrtConfig(**baselines_raw.get("gbrt", {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid baselines section: {e}") from e

    binning_raw = raw.get("binning", {})
    scales_path = binning_raw.get("scales_path")
    if scales_path is not None:
        scales_path = Path(scales_path)
        if not scales_path.is_absolute():
            scales_path = base_dir / scales_path

    synth_raw = dict(raw.get("synth", {}))
    synth_raw.setdefault("seed", the_seed)

    ablation_raw = raw.get("ablation", {})
    ablation_task = ablation_raw.get("task", "population")
    if ablation_task not in tasks:
        raise ConfigError(f"ablation task {ablation_task!r} not in configured tasks")

    baseline_space = raw.get("baseline_space", "bin")
    if baseline_space not in ("bin", "unit"):
        raise ConfigError("baseline_space must be 'bin' or 'unit'")

    return PipelineConfig(
        city=str(raw["city"]),
        bbox=_build_bbox(raw["bbox"]),
        workdir=workdir,
        tasks=tasks,
        seed=the_seed,
        split=split,
        retrieval=retrieval,
        model=model,
        synth=synth_raw,
        min_bin_values=int(binning_raw.get("min_values", 100)),
        scales_path=scales_path,
        knn=knn,
        gbrt=gbrt,
        baseline_space=baseline_space,
        ablation_task=ablation_task,
        answer_stage_images=bool(raw.get("answer_stage_images", True)),
    )


def stage_config_payload(cfg: PipelineConfig, stage: str) -> dict:
    """The config subset whose change invalidates a stage's outputs."""
    common = {"city": cfg.city, "bbox": cfg.bbox.as_dict(), "tasks": list(cfg.tasks),
              "seed": cfg.seed, "stage": stage}
    if stage == "synth":
        common["synth"] = cfg.synth
    elif stage == "sample":
        common["split"] = [cfg.split.train_frac, cfg.split.val_frac,
                           cfg.split.test_frac, cfg.split.seed]
        common["binning"] = {"min_values": cfg.min_bin_values,
                             "scales_path": str(cfg.scales_path)}
    elif stage == "retrieve":
        r = cfg.retrieval
        common["retrieval"] = {
            "places_radius_m": r.places_radius_m, "places_limit": r.places_limit,
            "svi_radius_m": r.svi_radius_m, "resample_probes": r.resample_probes,
            "svi_image_size": r.svi_image_size, "svi_heading": r.svi_heading,
            "keep_missing_images": r.keep_missing_images,
        }
    elif stage in ("predict", "ablate"):
        common["model"] = {"provider": cfg.model.provider,
                           "model_name": cfg.model.model_name,
                           "temperature": cfg.model.temperature,
                           "noise_sigma": cfg.model.noise_sigma,
                           "seed": cfg.model.seed}
        common["answer_stage_images"] = cfg.answer_stage_images
        if stage == "ablate":
            common["ablation_task"] = cfg.ablation_task
    elif stage == "baseline":
        common["knn"] = {"k": cfg.knn.k}
        common["gbrt"] = {"rounds": cfg.gbrt.rounds, "max_depth": cfg.gbrt.max_depth,
                          "learning_rate": cfg.gbrt.learning_rate,
                          "min_samples_leaf": cfg.gbrt.min_samples_leaf}
        common["baseline_space"] = cfg.baseline_space
    return common
