import json
import logging
import numpy as np
import os
import pandas as pd
import scipy.sparse as sp
import toml
import torch
from dataclasses import dataclass

from . import __version__
from .errors import ConfigError, InputError, ParseError
from .gnn import build_model
from .graph_core import Graph
from .ingest import EncodingSchema, FeatureTable, SplitMasks

logger = logging.getLogger(__name__)

GRAPH_MAGIC = b"LRGK1"
CHECKPOINT_FORMAT = "lrgk-checkpoint"
CHECKPOINT_VERSION = 1

REQUIRED_INPUT = {
    'Dataset': ['bundle'],
    'Training': ['architecture', 'layers', 'hops'],
    'Influence': ['hops', 'samples'],
    'IO': ['logName', 'results'],
}


def read_config_file(filename):
    """
    Read run parameters from a TOML (or JSON) configuration file.

    Parameters:
    - filename (str): Path to the configuration file.

    Returns:
    - dict: Configuration with the sections Dataset, Training, Influence and IO.

    Raises:
    - FileNotFoundError: If the file does not exist.
    - ConfigError: If the file cannot be parsed or misses required entries.
    """
    with open(filename, "r", encoding="utf-8") as file:
        try:
            if filename.endswith(".json"):
                config = json.load(file)
            else:
                config = toml.load(file)
        except (toml.TomlDecodeError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot parse '{filename}': {e}") from e

    # Verify the structure and required fields in config:
    for section, keys in REQUIRED_INPUT.items():
        if section not in config or not all(key in config[section] for key in keys):
            raise ConfigError(f"Missing required entries in {section} section of '{filename}'!")
    return config


@dataclass
class Bundle:
    """A dataset on disk: graph, features and optional labels, split and schema."""
    graph: Graph
    table: FeatureTable
    epsilon_hat: np.ndarray = None
    schema: EncodingSchema = None


def write_graph(g, filename):
    """
    Write the CSR graph in little-endian binary form.

    Layout: magic "LRGK1", u64 n_nodes, u64 nnz, u64 has_coords, then offsets
    and neighbors (u64), weights (f64) and, when present, coords (f64, n x 2).
    """
    header = np.array([g.n_nodes, len(g.neighbors), int(g.coords is not None)], dtype="<u8")
    with open(filename, "wb") as file:
        file.write(GRAPH_MAGIC)
        file.write(header.tobytes())
        file.write(np.asarray(g.offsets, dtype="<u8").tobytes())
        file.write(np.asarray(g.neighbors, dtype="<u8").tobytes())
        file.write(np.asarray(g.edge_weight, dtype="<f8").tobytes())
        if g.coords is not None:
            file.write(np.asarray(g.coords, dtype="<f8").tobytes())


def read_graph(filename):
    """Read a graph written by write_graph."""
    with open(filename, "rb") as file:
        data = file.read()
    if not data.startswith(GRAPH_MAGIC):
        raise InputError(f"'{filename}' is not a graph file (bad magic)")
    offset = len(GRAPH_MAGIC)
    try:
        n, nnz, has_coords = (int(x) for x in np.frombuffer(data, dtype="<u8", count=3, offset=offset))
        offset += 24
        indptr = np.frombuffer(data, dtype="<u8", count=n + 1, offset=offset).astype(np.int64)
        offset += 8 * (n + 1)
        indices = np.frombuffer(data, dtype="<u8", count=nnz, offset=offset).astype(np.int64)
        offset += 8 * nnz
        weights = np.frombuffer(data, dtype="<f8", count=nnz, offset=offset).copy()
        offset += 8 * nnz
        coords = None
        if has_coords:
            coords = np.frombuffer(data, dtype="<f8", count=2 * n, offset=offset).reshape(n, 2).copy()
    except ValueError as e:
        raise InputError(f"'{filename}' is truncated: {e}") from e
    return Graph(sp.csr_matrix((weights, indices, indptr), shape=(n, n)), coords)


def write_labels(filename, epsilon_hat, labels):
    pd.DataFrame({"id": np.arange(len(labels)), "epsilon_hat": epsilon_hat, "label": labels}).to_csv(filename, index=False)


def write_bundle(directory, g, table, schema=None, epsilon_hat=None):
    """
    Write graph.bin, features.csv and, when available, labels.csv, split.csv and schema.json.

    Parameters:
    - directory (str): Output directory, created if missing.
    - g (Graph): The graph.
    - table (FeatureTable): Features with optional labels and split.
    - schema (EncodingSchema | None): Encoding schema.
    - epsilon_hat (np.ndarray | None): Eccentricity estimates belonging to table.y.
    """
    os.makedirs(directory, exist_ok=True)
    write_graph(g, os.path.join(directory, "graph.bin"))
    features = pd.DataFrame(table.X, columns=table.feature_names)
    features.insert(0, "id", np.arange(table.n_nodes))
    features.to_csv(os.path.join(directory, "features.csv"), index=False)
    if table.y is not None:
        eps = np.full(table.n_nodes, np.nan) if epsilon_hat is None else epsilon_hat
        write_labels(os.path.join(directory, "labels.csv"), eps, table.y)
    if table.split is not None:
        pd.DataFrame({"id": np.arange(table.n_nodes), "split": table.split.names()}).to_csv(
            os.path.join(directory, "split.csv"), index=False)
    if schema is not None:
        store_json(schema.to_dict(), os.path.join(directory, "schema.json"))
    logger.info(f"Saved bundle with {g.n_nodes} nodes to {directory}")


def _read_csv(path, columns):
    frame = pd.read_csv(path)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(path, 1, f"missing columns {missing}")
    return frame


def read_bundle(directory):
    """
    Load a bundle written by write_bundle.

    Raises:
    - FileNotFoundError: If graph.bin or features.csv is missing.
    - InputError: If the files disagree on the node count.
    """
    g = read_graph(os.path.join(directory, "graph.bin"))
    features = _read_csv(os.path.join(directory, "features.csv"), ["id"])
    if len(features) != g.n_nodes:
        raise InputError(f"features.csv has {len(features)} rows but the graph has {g.n_nodes} nodes")
    names = [c for c in features.columns if c != "id"]
    table = FeatureTable(X=features[names].to_numpy(dtype=np.float64), feature_names=names)

    bundle = Bundle(g, table)
    labels_file = os.path.join(directory, "labels.csv")
    if os.path.isfile(labels_file):
        labels = _read_csv(labels_file, ["id", "epsilon_hat", "label"])
        table.y = labels["label"].to_numpy(dtype=np.int64)
        bundle.epsilon_hat = labels["epsilon_hat"].to_numpy(dtype=np.float64)
    split_file = os.path.join(directory, "split.csv")
    if os.path.isfile(split_file):
        table.split = SplitMasks.from_names(_read_csv(split_file, ["id", "split"])["split"].to_numpy())
    schema_file = os.path.join(directory, "schema.json")
    if os.path.isfile(schema_file):
        with open(schema_file, "r", encoding="utf-8") as file:
            bundle.schema = EncodingSchema.from_dict(json.load(file))
    return bundle


def save_checkpoint(filename, model, extra=None):
    """Save model hyperparameters and weights in a versioned checkpoint."""
    payload = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, **model.hyperparameters(),
               "state_dict": model.state_dict(), "extra": extra or {}}
    torch.save(payload, filename)
    logger.info(f"Saved checkpoint to {filename}")


def load_checkpoint(filename):
    """
    Rebuild a model from a checkpoint.

    Returns:
    - tuple(GraphModel, dict): the model and the extra metadata.

    Raises:
    - InputError: If the file is not a checkpoint of a supported version.
    """
    payload = torch.load(filename, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise InputError(f"'{filename}' is not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise InputError(f"Unsupported checkpoint version {payload.get('version')} in '{filename}'")
    model = build_model(payload["architecture"], payload["in_dim"], payload["out_dim"], payload["layers"],
                        payload["hidden"], payload["dropout"], payload["gamma"])
    model.load_state_dict(payload["state_dict"])
    return model, payload["extra"]


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def store_json(data, filename):
    """Write a dict as indented JSON; numpy scalars and arrays are converted."""
    with open(filename, "w", encoding="utf-8") as file:
        json.dump(data, file, indent=4, default=_to_builtin)
    logger.info(f"Saved {filename}")


def store_history(history, filename):
    """Write the training history (epoch, train_loss, val_acc) as CSV."""
    history.to_csv(filename, index=False)
    logger.info(f"Saved training history to {filename}")


def write_manifest(directory, subcommand, arguments, config, seed):
    """Record everything needed to rerun a command in manifest.json."""
    store_json({"subcommand": subcommand, "arguments": arguments, "config": config,
                "seed": seed, "version": __version__}, os.path.join(directory, "manifest.json"))
