import logging
import networkx as nx
import numpy as np
import pandas as pd
import scipy.sparse as sp
from dataclasses import dataclass, field
from scipy.sparse import csgraph

from .errors import InputError, ParseError
from .graph_core import Graph

logger = logging.getLogger(__name__)

NODE_COLUMNS = ["id", "lon", "lat", "street_count", "land_use"]
EDGE_COLUMNS = ["u", "v", "length", "speed", "one_way", "reversed", "lanes", "road_type"]

NODE_NUMERIC = ["lon", "lat", "street_count"]
EDGE_NUMERIC = ["length", "speed"]
RANKED_CATEGORICAL = {"land_use": "nodes", "lanes": "edges", "road_type": "edges"}
FLAG_CATEGORIES = {"one_way": ["False", "True"], "reversed": ["False", "True", "mixed"]}
TOP_K = 8
OTHER = "other"

# Vocabulary of the synthetic cities.
LAND_USES = ["residential", "commercial", "industrial", "retail", "forest",
             "farmland", "grass", "park", "railway", "cemetery"]
ROAD_TYPES = ["residential", "service", "footway", "tertiary", "secondary",
              "primary", "unclassified", "living_street", "cycleway", "path"]
SPEED_BY_TYPE = {"residential": 30, "service": 20, "footway": 5, "tertiary": 40,
                 "secondary": 50, "primary": 60, "unclassified": 30,
                 "living_street": 15, "cycleway": 20, "path": 5}
LANES_BY_TYPE = {"residential": ["1", "2"], "service": ["1"], "footway": ["1"],
                 "tertiary": ["2", "[1, 2]"], "secondary": ["2", "3", "[2, 3]"],
                 "primary": ["3", "4", "[3, 4]", "[2, 4]"], "unclassified": ["1", "2"],
                 "living_street": ["1"], "cycleway": ["1"], "path": ["1"]}


@dataclass
class RawCityRecord:
    """
    Road junctions and segments before encoding.

    `nodes` is indexed by dense node id and keeps the original id in column `id`.
    `edges` holds one row per original (possibly directed) segment with dense
    endpoints `u`, `v` and `edge_id`, the index of the merged undirected edge in
    `Graph.edge_list()` order.
    """
    nodes: pd.DataFrame
    edges: pd.DataFrame


@dataclass
class EncodingSchema:
    """Kept categories per categorical feature and (mean, std) per numeric feature."""
    categories: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)

    def feature_names(self):
        """
        Ordered column names: node block followed by edge block.

        Returns:
        - list[str]
        """
        names = list(NODE_NUMERIC)
        names += [f"land_use={c}" for c in self.categories["land_use"]]
        names += list(EDGE_NUMERIC)
        for key in ("one_way", "reversed", "lanes", "road_type"):
            names += [f"{key}={c}" for c in self.categories[key]]
        return names

    @property
    def width(self):
        return len(self.feature_names())

    def to_dict(self):
        return {"categories": {k: list(v) for k, v in self.categories.items()},
                "numeric": {k: [float(m), float(s)] for k, (m, s) in self.numeric.items()}}

    @classmethod
    def from_dict(cls, data):
        return cls(categories={k: list(v) for k, v in data["categories"].items()},
                   numeric={k: (float(m), float(s)) for k, (m, s) in data["numeric"].items()})


@dataclass
class SplitMasks:
    """Disjoint boolean masks covering every node."""
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def names(self):
        """Per-node split name ("train", "val" or "test")."""
        out = np.full(len(self.train), "test", dtype=object)
        out[self.train] = "train"
        out[self.val] = "val"
        return out

    @classmethod
    def from_names(cls, names):
        names = np.asarray(names, dtype=object)
        return cls(names == "train", names == "val", names == "test")

    def __getitem__(self, key):
        return {"train": self.train, "val": self.val, "test": self.test}[key]


@dataclass
class FeatureTable:
    """Dense node features plus optional labels and split masks."""
    X: np.ndarray
    feature_names: list
    y: np.ndarray = None
    split: SplitMasks = None

    @property
    def n_nodes(self):
        return self.X.shape[0]

    @property
    def width(self):
        return self.X.shape[1]

    @property
    def n_classes(self):
        return 0 if self.y is None else int(self.y.max()) + 1


def _read_table(path, columns):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(path, 1, f"unreadable CSV: {e}") from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(path, 1, f"missing columns {missing}")
    return frame[columns].apply(lambda col: col.str.strip())


def _numeric_column(frame, column, path, integer=False):
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | ~np.isfinite(values.astype(float))
    if integer:
        bad |= values.fillna(0) % 1 != 0
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(path, row + 2, f"invalid {column} value {frame[column].iloc[row]!r}")
    return values.astype(np.int64 if integer else np.float64).to_numpy()


def _parse_flag(value):
    text = str(value).strip().lower()
    if text in ("true", "1", "yes"):
        return "True"
    if text in ("false", "0", "no", ""):
        return "False"
    if text.startswith("[") and text.endswith("]"):
        parts = {p.strip() for p in text[1:-1].split(",") if p.strip()}
        if parts == {"true", "false"}:
            return "mixed"
        if len(parts) == 1:
            return _parse_flag(parts.pop())
    return None


def _flag_column(frame, column, path):
    parsed = frame[column].map(_parse_flag)
    if parsed.isna().any():
        row = int(np.flatnonzero(parsed.isna().to_numpy())[0])
        raise ParseError(path, row + 2, f"invalid {column} value {frame[column].iloc[row]!r}")
    if column == "one_way":
        # one-way on at least one segment of the way
        parsed = parsed.replace("mixed", "True")
    return parsed.to_numpy(dtype=object)


def load_city(nodes_file, edges_file):
    """
    Read a city from the nodes/edges CSV interchange files.

    Parallel and antiparallel segments between the same pair of junctions are
    merged into one undirected edge whose weight is their mean length, self-loops
    are dropped, the largest connected component is retained and node ids are
    densified in ascending order of the original ids.

    Parameters:
    - nodes_file (str): CSV with columns id,lon,lat,street_count,land_use.
    - edges_file (str): CSV with columns u,v,length,speed,one_way,reversed,lanes,road_type.

    Returns:
    - tuple(Graph, RawCityRecord)

    Raises:
    - ParseError: For a malformed row (with its line number).
    - InputError: If no edge survives.
    """
    # Step 1: Read both tables as strings and parse the typed columns
    nodes = _read_table(nodes_file, NODE_COLUMNS)
    edges = _read_table(edges_file, EDGE_COLUMNS)
    if nodes.empty:
        raise InputError(f"{nodes_file} declares no nodes")

    node_ids = _numeric_column(nodes, "id", nodes_file, integer=True)
    duplicated = pd.Series(node_ids).duplicated().to_numpy()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0])
        raise ParseError(nodes_file, row + 2, f"duplicate node id {node_ids[row]}")
    node_frame = pd.DataFrame({
        "id": node_ids,
        "lon": _numeric_column(nodes, "lon", nodes_file),
        "lat": _numeric_column(nodes, "lat", nodes_file),
        "street_count": _numeric_column(nodes, "street_count", nodes_file),
        "land_use": nodes["land_use"].to_numpy(dtype=object),
    })

    edge_frame = pd.DataFrame({
        "u": _numeric_column(edges, "u", edges_file, integer=True),
        "v": _numeric_column(edges, "v", edges_file, integer=True),
        "length": _numeric_column(edges, "length", edges_file),
        "speed": _numeric_column(edges, "speed", edges_file),
        "one_way": _flag_column(edges, "one_way", edges_file),
        "reversed": _flag_column(edges, "reversed", edges_file),
        "lanes": edges["lanes"].to_numpy(dtype=object),
        "road_type": edges["road_type"].to_numpy(dtype=object),
    })
    # Step 2: Verify the edges refer to declared nodes and have positive length
    declared = set(node_ids.tolist())
    for column in ("u", "v"):
        unknown = ~edge_frame[column].isin(declared).to_numpy()
        if unknown.any():
            row = int(np.flatnonzero(unknown)[0])
            raise ParseError(edges_file, row + 2, f"edge endpoint {edge_frame[column].iloc[row]} is not a declared node")
    short = (edge_frame["length"] <= 0).to_numpy()
    if short.any():
        row = int(np.flatnonzero(short)[0])
        raise ParseError(edges_file, row + 2, f"edge length must be > 0, got {edge_frame['length'].iloc[row]}")

    # Step 3: Drop self-loops, then merge and filter in _assemble
    edge_frame = edge_frame[edge_frame["u"] != edge_frame["v"]].reset_index(drop=True)
    if edge_frame.empty:
        raise InputError(f"{edges_file} contains no usable edges")

    g, raw = _assemble(node_frame, edge_frame)
    logger.info(f"Loaded city from {nodes_file}, {edges_file}: {g.n_nodes} nodes, {g.n_edges} edges")
    return g, raw


def _assemble(node_frame, edge_frame):
    """Merge parallel segments, keep the largest component and densify ids."""
    order = np.argsort(node_frame["id"].to_numpy(), kind="stable")
    node_frame = node_frame.iloc[order].reset_index(drop=True)
    position = pd.Series(np.arange(len(node_frame)), index=node_frame["id"].to_numpy())
    u = position[edge_frame["u"].to_numpy()].to_numpy()
    v = position[edge_frame["v"].to_numpy()].to_numpy()

    n = len(node_frame)
    connectivity = sp.coo_matrix((np.ones(len(u)), (u, v)), shape=(n, n))
    _, labels = csgraph.connected_components(connectivity, directed=False)
    sizes = np.bincount(labels)
    keep = np.flatnonzero(labels == np.argmax(sizes))
    if len(keep) < 2:
        raise InputError("Largest connected component has no edges")

    dense = np.full(n, -1, dtype=np.int64)
    dense[keep] = np.arange(len(keep))
    node_frame = node_frame.iloc[keep].reset_index(drop=True)
    in_component = dense[u] >= 0
    edge_frame = edge_frame[in_component].reset_index(drop=True)
    u, v = dense[u[in_component]], dense[v[in_component]]

    n = len(keep)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    keys, edge_id = np.unique(lo * n + hi, return_inverse=True)
    edge_frame = edge_frame.assign(u=u, v=v, edge_id=edge_id)
    mean_length = edge_frame.groupby("edge_id")["length"].mean().to_numpy()

    coords = node_frame[["lon", "lat"]].to_numpy()
    g = Graph.from_edges(n, keys // n, keys % n, mean_length, coords)
    return g, RawCityRecord(node_frame, edge_frame)


def write_city(raw, nodes_file, edges_file):
    """
    Write the merged record back to the CSV interchange schema.

    One row is written per undirected edge: numeric fields carry the mean over
    the merged segments, text fields the value of the first segment.

    Parameters:
    - raw (RawCityRecord): The record to export.
    - nodes_file (str): Output path for the nodes CSV.
    - edges_file (str): Output path for the edges CSV.
    """
    original = raw.nodes["id"].to_numpy()
    raw.nodes[NODE_COLUMNS].to_csv(nodes_file, index=False)
    merged = raw.edges.groupby("edge_id", sort=True).agg(
        u=("u", "first"), v=("v", "first"), length=("length", "mean"), speed=("speed", "mean"),
        one_way=("one_way", "first"), reversed=("reversed", "first"),
        lanes=("lanes", "first"), road_type=("road_type", "first"))
    merged["reversed"] = merged["reversed"].replace("mixed", "[False, True]")
    merged["u"] = original[merged["u"].to_numpy()]
    merged["v"] = original[merged["v"].to_numpy()]
    merged[EDGE_COLUMNS].to_csv(edges_file, index=False)


def _rank_categories(values):
    values = pd.Series(values, dtype=object).astype(str).str.strip()
    counts = values[(values != "") & (values != OTHER)].value_counts()
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:TOP_K]] + [OTHER]


def _one_hot(values, categories):
    lookup = {c: i for i, c in enumerate(categories)}
    fallback = lookup.get(OTHER)
    index = np.array([lookup.get(str(v).strip(), fallback) for v in values], dtype=np.int64)
    return np.eye(len(categories))[index]


def _incidence(n_nodes, edge_u, edge_v):
    m = len(edge_u)
    rows = np.concatenate([edge_u, edge_v])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    return sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(n_nodes, m))


def edge_feature_block(raw, schema, n_nodes=None):
    """
    Mean over incident edges of the encoded edge features, before standardization.

    Segments merged into one undirected edge are averaged first (so one-hot
    columns become local probabilities), then each node averages its incident
    undirected edges.

    Parameters:
    - raw (RawCityRecord): Source record.
    - schema (EncodingSchema): Kept categories.
    - n_nodes (int | None): Node count, defaults to the record's.

    Returns:
    - np.ndarray: n_nodes x 25 matrix for the city schema.
    """
    n_nodes = len(raw.nodes) if n_nodes is None else n_nodes
    edges = raw.edges
    blocks = [edges[EDGE_NUMERIC].to_numpy(dtype=np.float64)]
    for key in ("one_way", "reversed", "lanes", "road_type"):
        blocks.append(_one_hot(edges[key].to_numpy(), schema.categories[key]))
    per_segment = np.hstack(blocks)
    merged = pd.DataFrame(per_segment).groupby(edges["edge_id"].to_numpy(), sort=True).mean().to_numpy()
    endpoints = edges.groupby("edge_id", sort=True)[["u", "v"]].first().to_numpy()

    incidence = _incidence(n_nodes, endpoints[:, 0], endpoints[:, 1])
    degree = np.asarray(incidence.sum(axis=1)).ravel()
    if np.any(degree == 0):
        raise InputError("Every node needs at least one incident edge")
    return np.asarray(incidence @ merged) / degree[:, None]


def build_schema(raw):
    """
    Choose the kept categories and the standardization statistics.

    Categories are ranked by frequency with ties broken lexicographically; the
    top 8 are kept and every other value, including empty strings, maps to "other".
    Numeric statistics are population mean and std over the node set; edge
    numerics are taken after transfer to nodes.

    Parameters:
    - raw (RawCityRecord): Source record.

    Returns:
    - EncodingSchema
    """
    if raw.nodes.empty or raw.edges.empty:
        raise InputError("Cannot build a schema from an empty record")
    categories = {}
    for key, table in RANKED_CATEGORICAL.items():
        frame = raw.nodes if table == "nodes" else raw.edges
        categories[key] = _rank_categories(frame[key].to_numpy())
    categories.update({k: list(v) for k, v in FLAG_CATEGORIES.items()})
    schema = EncodingSchema(categories=categories)

    for key in NODE_NUMERIC:
        values = raw.nodes[key].to_numpy(dtype=np.float64)
        schema.numeric[key] = (float(values.mean()), float(values.std()))
    edge_block = edge_feature_block(raw, schema)
    for i, key in enumerate(EDGE_NUMERIC):
        schema.numeric[key] = (float(edge_block[:, i].mean()), float(edge_block[:, i].std()))
    return schema


def _standardize(values, stats):
    mean, std = stats
    if std <= 0:
        return np.zeros_like(values)
    return (values - mean) / std


def encode_features(g, raw, schema):
    """
    Encode node and transferred edge features into a dense matrix.

    Parameters:
    - g (Graph): The ingested graph.
    - raw (RawCityRecord): Its record.
    - schema (EncodingSchema): Categories and statistics.

    Returns:
    - FeatureTable: labels and split are left unset.
    """
    if len(raw.nodes) != g.n_nodes:
        raise InputError(f"Record has {len(raw.nodes)} nodes but the graph has {g.n_nodes}")
    node_numeric = np.column_stack([
        _standardize(raw.nodes[key].to_numpy(dtype=np.float64), schema.numeric[key]) for key in NODE_NUMERIC])
    land_use = _one_hot(raw.nodes["land_use"].to_numpy(), schema.categories["land_use"])

    edge_block = edge_feature_block(raw, schema, g.n_nodes)
    for i, key in enumerate(EDGE_NUMERIC):
        edge_block[:, i] = _standardize(edge_block[:, i], schema.numeric[key])

    X = np.hstack([node_numeric, land_use, edge_block])
    return FeatureTable(X=X, feature_names=schema.feature_names())


def make_split(n_nodes, fractions=(0.1, 0.1, 0.8), seed=0):
    """
    Deterministic train/val/test split from a seeded permutation.

    Parameters:
    - n_nodes (int): Number of nodes.
    - fractions (tuple[float, float, float]): Train, validation and test shares.
    - seed (int): Permutation seed.

    Returns:
    - SplitMasks
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise InputError(f"Split fractions must be three nonnegative shares summing to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(n_nodes)
    n_train = int(round(fractions[0] * n_nodes))
    n_val = int(round(fractions[1] * n_nodes))
    masks = [np.zeros(n_nodes, dtype=bool) for _ in range(3)]
    masks[0][order[:n_train]] = True
    masks[1][order[n_train:n_train + n_val]] = True
    masks[2][order[n_train + n_val:]] = True
    return SplitMasks(*masks)


def _draw_lengths(weight_law, edge_block, n_blocks, rng):
    m = len(edge_block)
    if weight_law == "unit":
        return np.ones(m)
    if weight_law == "uniform":
        return rng.uniform(50.0, 150.0, m)
    if weight_law == "lognormal":
        return rng.lognormal(np.log(100.0), 0.5, m)
    if weight_law == "block":
        density = rng.uniform(0.5, 2.0, n_blocks)
        return density[edge_block] * rng.uniform(50.0, 150.0, m)
    raise InputError(f"Unknown weight law {weight_law!r}; expected unit, uniform, lognormal or block")


def _synthesize_record(g, node_block, n_blocks, rng):
    """Assign land use, road type, speed, lanes and flags by spatial block."""
    u, v, length = g.edge_list()
    m = len(u)
    block_land_use = rng.choice(LAND_USES, size=n_blocks)
    block_road_type = rng.choice(ROAD_TYPES, size=n_blocks)

    road_type = block_road_type[node_block[u]].astype(object)
    mixed = rng.random(m) < 0.15
    road_type[mixed] = rng.choice(ROAD_TYPES, size=int(mixed.sum()))
    lanes = np.array([LANES_BY_TYPE[t][i % len(LANES_BY_TYPE[t])]
                      for t, i in zip(road_type, rng.integers(0, 4, m))], dtype=object)
    draw = rng.random(m)
    reversed_flag = np.where(draw < 0.05, "True", np.where(draw < 0.08, "mixed", "False")).astype(object)
    one_way = np.where(rng.random(m) < 0.2, "True", "False").astype(object)

    coords = g.coords if g.coords is not None else np.zeros((g.n_nodes, 2))
    nodes = pd.DataFrame({
        "id": np.arange(g.n_nodes),
        "lon": coords[:, 0],
        "lat": coords[:, 1],
        "street_count": g.degrees.astype(np.float64),
        "land_use": block_land_use[node_block].astype(object),
    })
    edges = pd.DataFrame({
        "u": u, "v": v, "length": length,
        "speed": np.array([SPEED_BY_TYPE[t] for t in road_type], dtype=np.float64),
        "one_way": one_way, "reversed": reversed_flag,
        "lanes": lanes, "road_type": road_type,
        "edge_id": np.arange(m),
    })
    return RawCityRecord(nodes, edges)


def _perturb(graph, perturb_p, rng):
    for a, b in sorted(graph.edges()):
        if rng.random() >= perturb_p:
            continue
        graph.remove_edge(a, b)
        if not nx.has_path(graph, a, b):
            graph.add_edge(a, b)


def gen_grid_city(width, height, weight_law="block", perturb_p=0.0, seed=0):
    """
    Synthetic grid-like city.

    Node `row * width + col` sits at coordinates (lon=col, lat=row). Edges are
    deleted with probability `perturb_p` when the deletion keeps the graph
    connected. Categorical attributes are assigned per square block of the grid.

    Parameters:
    - width, height (int): Grid size, both >= 2.
    - weight_law (str): "unit", "uniform", "lognormal" or "block".
    - perturb_p (float): Edge deletion probability.
    - seed (int): Random seed.

    Returns:
    - tuple(Graph, RawCityRecord)
    """
    if width < 2 or height < 2:
        raise InputError(f"Grid must be at least 2x2, got {width}x{height}")
    if not 0.0 <= perturb_p <= 1.0:
        raise InputError(f"perturb_p must be in [0, 1], got {perturb_p}")
    rng = np.random.default_rng(seed)
    lattice = nx.convert_node_labels_to_integers(nx.grid_2d_graph(height, width), ordering="sorted")
    if perturb_p > 0:
        _perturb(lattice, perturb_p, rng)

    n = width * height
    rows, cols = np.divmod(np.arange(n), width)
    block = max(2, min(width, height) // 8)
    blocks_per_row = -(-width // block)
    node_block = (rows // block) * blocks_per_row + cols // block
    n_blocks = int(node_block.max()) + 1

    edges = np.array(sorted(lattice.edges()), dtype=np.int64).reshape(-1, 2)
    lengths = _draw_lengths(weight_law, node_block[edges[:, 0]], n_blocks, rng)
    coords = np.column_stack([cols, rows]).astype(np.float64)
    g = Graph.from_edges(n, edges[:, 0], edges[:, 1], lengths, coords)
    raw = _synthesize_record(g, node_block, n_blocks, rng)
    logger.info(f"Generated {width}x{height} grid city: {g.n_nodes} nodes, {g.n_edges} edges")
    return g, raw


def gen_small_world(n, k, rewire_p, seed=0):
    """
    Connected Watts-Strogatz small-world graph with unit weights.

    Parameters:
    - n (int): Number of nodes.
    - k (int): Even ring-lattice degree, k < n.
    - rewire_p (float): Rewiring probability.
    - seed (int): Random seed.

    Returns:
    - Graph
    """
    if k % 2 or k <= 0 or k >= n:
        raise InputError(f"k must be even with 0 < k < n, got k={k}, n={n}")
    try:
        ring = nx.connected_watts_strogatz_graph(n, k, rewire_p, tries=1000, seed=seed)
    except nx.NetworkXError as e:
        raise InputError(f"Could not generate a connected small-world graph: {e}") from e
    edges = np.array(sorted(tuple(sorted(e)) for e in ring.edges()), dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(n, edges[:, 0], edges[:, 1])


def gen_small_world_city(n, k, rewire_p, seed=0, weight_law="uniform"):
    """
    Small-world graph carrying the same synthetic road attributes as a grid city.

    Nodes are placed on a circle; blocks are consecutive arcs of the ring.

    Returns:
    - tuple(Graph, RawCityRecord)
    """
    ring = gen_small_world(n, k, rewire_p, seed)
    rng = np.random.default_rng(seed)
    node_block = np.arange(n) // max(1, n // 64)
    n_blocks = int(node_block.max()) + 1
    u, v, _ = ring.edge_list()
    lengths = _draw_lengths(weight_law, node_block[u], n_blocks, rng)
    angle = 2 * np.pi * np.arange(n) / n
    g = Graph.from_edges(n, u, v, lengths, np.column_stack([np.cos(angle), np.sin(angle)]))
    return g, _synthesize_record(g, node_block, n_blocks, rng)
