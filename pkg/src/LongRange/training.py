import copy
import logging
import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError, InputError, TrainingError
from .gnn import MODELS, build_model, forward
from .sampling import sample_ego

logger = logging.getLogger(__name__)

HOP_GRID = (2, 4, 8, 16)
FIXED_DEPTH = 16
# seeds per evaluation batch; every seed carries its own copy of its ball
EVAL_BATCH_SIZE = 1024


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; `layers` is the model depth L and `hops` the sampling radius H."""
    architecture: str = "gcn"
    layers: int = 2
    hops: int = 2
    hidden: int = 32
    lr: float = 1e-3
    weight_decay: float = 1e-5
    dropout: float = 0.2
    epochs: int = 1000
    record_window: int = 100
    seed: int = 0
    batch_size: int = 20000
    cap_per_hop: int = None
    gamma: float = 1.0

    def __post_init__(self):
        if self.architecture.lower() not in MODELS.architectures:
            raise ConfigError(f"Unknown architecture {self.architecture!r}; expected one of {MODELS.architectures}")
        for name in ("layers", "hops", "hidden", "epochs", "record_window", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigError("lr and weight_decay must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.cap_per_hop is not None and self.cap_per_hop < 1:
            raise ConfigError(f"cap_per_hop must be >= 1, got {self.cap_per_hop}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")

    @classmethod
    def from_dict(cls, values):
        """
        Build a config from a [Training] section.

        Raises:
        - ConfigError: For unknown keys or invalid values.
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown training keys: {unknown}")
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"Invalid training value: {e}") from e

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: torch.nn.Module
    history: pd.DataFrame
    best_epoch: int
    best_val_acc: float


def _epoch_seed(seed, epoch):
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


class BatchCache:
    """
    Ego batches of fixed seed chunks.

    Exhaustive sampling is deterministic, so batches are built once; with a
    per-hop cap they are resampled for every epoch.
    """
    def __init__(self, g, X, config, batch_size=None) -> None:
        self.g = g
        self.X = X
        self.config = config
        self.batch_size = config.batch_size if batch_size is None else batch_size
        self._cache = {}

    def batches(self, seeds, epoch=0):
        seeds = np.sort(np.asarray(seeds, dtype=np.int64))
        key = seeds.tobytes()
        if self.config.cap_per_hop is None and key in self._cache:
            return self._cache[key]
        sample_seed = _epoch_seed(self.config.seed, epoch)
        chunks = [seeds[i:i + self.batch_size] for i in range(0, len(seeds), self.batch_size)]
        batches = [sample_ego(self.g, chunk, self.config.hops, self.config.cap_per_hop, sample_seed, self.X)
                   for chunk in chunks]
        if self.config.cap_per_hop is None:
            self._cache[key] = batches
        return batches


def _labels(table):
    if table.y is None or table.split is None:
        raise InputError("Training needs labels and split masks")
    return torch.as_tensor(np.asarray(table.y), dtype=torch.long)


def evaluate(model, g, table, mask, config, cache=None):
    """
    Argmax accuracy over the masked nodes.

    Ego batches are sampled with the same radius and cap as training, in
    chunks of at most EVAL_BATCH_SIZE seeds.

    Returns:
    - float
    """
    seeds = np.flatnonzero(mask)
    if len(seeds) == 0:
        raise InputError("Evaluation mask selects no nodes")
    y = _labels(table)
    if cache is None:
        cache = BatchCache(g, table.X, config, min(config.batch_size, EVAL_BATCH_SIZE))
    model.eval()
    correct = 0
    with torch.no_grad():
        for batch in cache.batches(seeds):
            logits, _ = forward(model, batch)
            correct += int((logits.argmax(dim=1) == y[batch.seeds]).sum())
    return correct / len(seeds)


def train(g, table, config, model=None):
    """
    Train a node classifier on ego batches of the training seeds.

    AdamW minimizes cross-entropy on the seed logits. Validation accuracy is
    recorded every `record_window` epochs and at the last epoch; the parameters
    of the best validation record are restored at the end.

    Parameters:
    - g (Graph): The graph.
    - table (FeatureTable): Features, labels and split.
    - config (TrainConfig): Hyperparameters.
    - model (GraphModel | None): Model to train; built from the config when omitted.

    Returns:
    - TrainResult

    Raises:
    - TrainingError: If the loss becomes NaN or infinite.
    """
    # Step 1: Model, optimizer and seed batches
    y = _labels(table)
    if model is None:
        model = build_model(config.architecture, table.width, table.n_classes, config.layers,
                            config.hidden, config.dropout, config.gamma, config.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay,
                                  betas=(0.9, 0.999), eps=1e-8)
    cache = BatchCache(g, table.X, config)
    val_cache = BatchCache(g, table.X, config, min(config.batch_size, EVAL_BATCH_SIZE))
    train_seeds = np.flatnonzero(table.split.train)
    if len(train_seeds) == 0:
        raise InputError("Training mask selects no nodes")

    # Step 2: Epoch loop
    rows = []
    best_epoch, best_val, best_state = 0, -1.0, None
    for epoch in range(1, config.epochs + 1):
        model.train()
        generator = torch.Generator().manual_seed(_epoch_seed(config.seed, epoch))
        batches = cache.batches(train_seeds, epoch)
        order = np.random.default_rng(_epoch_seed(config.seed, epoch)).permutation(len(batches))
        total = 0.0
        for i in order:
            batch = batches[i]
            optimizer.zero_grad()
            logits, _ = forward(model, batch, generator)
            loss = F.cross_entropy(logits, y[batch.seeds])
            if not torch.isfinite(loss):
                raise TrainingError(f"Loss became {loss.item()} at epoch {epoch} ({config.architecture}, "
                                    f"L={config.layers}, H={config.hops}, lr={config.lr})")
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch.seeds)

        # Step 3: Record validation accuracy and keep the best parameters
        if epoch % config.record_window == 0 or epoch == config.epochs:
            val_acc = evaluate(model, g, table, table.split.val, config, val_cache)
            rows.append({"epoch": epoch, "train_loss": total / len(train_seeds), "val_acc": val_acc})
            if val_acc > best_val:
                best_epoch, best_val = epoch, val_acc
                best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    logger.info(f"Trained {config.architecture} (L={config.layers}, H={config.hops}): "
                f"best validation accuracy {best_val:.4f} at epoch {best_epoch}")
    return TrainResult(model, pd.DataFrame(rows, columns=["epoch", "train_loss", "val_acc"]), best_epoch, best_val)


def run_experiment(g, table, base_config, architectures=("mlp", "sgc", "gcn"), hops=HOP_GRID,
                   settings=("matched", "fixed"), fixed_layers=FIXED_DEPTH):
    """
    Accuracy over the (L, H) grid.

    Setting "matched" trains with L = H, setting "fixed" keeps L = fixed_layers
    and varies only H.

    Returns:
    - pd.DataFrame: architecture, setting, layers, hops, best_epoch, val_acc, test_acc.
    """
    rows = []
    for setting in settings:
        if setting not in ("matched", "fixed"):
            raise ConfigError(f"Unknown experiment setting {setting!r}")
        for architecture in architectures:
            for h in hops:
                layers = h if setting == "matched" else fixed_layers
                config = replace(base_config, architecture=architecture, layers=layers, hops=h)
                result = train(g, table, config)
                test_acc = evaluate(result.model, g, table, table.split.test, config)
                rows.append({"architecture": architecture, "setting": setting, "layers": layers, "hops": h,
                             "best_epoch": result.best_epoch, "val_acc": result.best_val_acc, "test_acc": test_acc})
                logger.info(f"{setting} {architecture} L={layers} H={h}: test accuracy {test_acc:.4f}")
    return pd.DataFrame(rows)
