import logging
import torch
import torch.nn as nn
from abc import ABC, abstractmethod

from .errors import InputError, StateError

logger = logging.getLogger(__name__)


class ModelFactory:
    """Create model instances from an architecture name."""
    def __init__(self) -> None:
        self._architectures = {}

    def register(self, key, model_class):
        """
        Register a model class under a name.

        Parameters:
        - key (str): Architecture name, e.g. "gcn".
        - model_class (type): Subclass of GraphModel.
        """
        self._architectures[key.lower()] = model_class

    @property
    def architectures(self):
        return sorted(self._architectures)

    def __call__(self, key, in_dim, out_dim, layers=2, hidden=32, dropout=0.0, gamma=1.0):
        """
        Build a model of the registered architecture.

        Raises:
        - InputError: If the architecture is unknown.
        """
        try:
            model_class = self._architectures[key.lower()]
        except KeyError:
            raise InputError(f"Unknown architecture {key!r}; expected one of {self.architectures}") from None
        return model_class(in_dim, out_dim, layers, hidden, dropout, gamma)


class GraphModel(nn.Module, ABC):
    """
    Node classifier over an ego batch.

    Subclasses map (features, propagation matrix) to logits for every local
    node. Dropout acts on hidden activations only and draws its mask from the
    generator passed to forward; without a generator no dropout is applied.
    """
    architecture = None

    def __init__(self, in_dim, out_dim, layers=2, hidden=32, dropout=0.0, gamma=1.0) -> None:
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise InputError(f"Model dimensions must be positive, got in={in_dim}, out={out_dim}")
        if layers < 1:
            raise InputError(f"Model needs at least one layer, got {layers}")
        if not 0.0 <= dropout < 1.0:
            raise InputError(f"Dropout must be in [0, 1), got {dropout}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.n_layers = layers
        self.hidden = hidden
        self.dropout = dropout
        self.gamma = gamma

    def hyperparameters(self):
        return {"architecture": self.architecture, "in_dim": self.in_dim, "out_dim": self.out_dim,
                "layers": self.n_layers, "hidden": self.hidden, "dropout": self.dropout, "gamma": self.gamma}

    def _widths(self):
        return [self.in_dim] + [self.hidden] * (self.n_layers - 1) + [self.out_dim]

    def _drop(self, h, generator):
        if generator is None or self.dropout == 0.0:
            return h
        keep = torch.empty_like(h).bernoulli_(1.0 - self.dropout, generator=generator)
        return h * keep / (1.0 - self.dropout)

    def _check_width(self, x):
        if x.shape[-1] != self.in_dim:
            raise InputError(f"Feature width {x.shape[-1]} does not match model input width {self.in_dim}")

    @abstractmethod
    def forward(self, x, propagation=None, generator=None):
        """
        Compute logits for every node of the batch.

        Parameters:
        - x (torch.Tensor): n_local x in_dim features.
        - propagation (torch.Tensor | None): Sparse n_local x n_local operator.
        - generator (torch.Generator | None): Dropout randomness; None disables dropout.

        Returns:
        - torch.Tensor: n_local x out_dim logits.
        """
        pass


class MLP(GraphModel):
    """Stack of linear layers with ReLU; ignores the graph."""
    architecture = "mlp"

    def __init__(self, in_dim, out_dim, layers=2, hidden=32, dropout=0.0, gamma=1.0) -> None:
        super().__init__(in_dim, out_dim, layers, hidden, dropout, gamma)
        widths = self._widths()
        self.linears = nn.ModuleList(nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:]))

    def forward(self, x, propagation=None, generator=None):
        self._check_width(x)
        h = x
        for i, linear in enumerate(self.linears):
            h = linear(h)
            if i < len(self.linears) - 1:
                h = self._drop(torch.relu(h), generator)
        return h


class GCN(GraphModel):
    """Layers ReLU(S h W + b); the last layer returns logits without activation."""
    architecture = "gcn"

    def __init__(self, in_dim, out_dim, layers=2, hidden=32, dropout=0.0, gamma=1.0) -> None:
        super().__init__(in_dim, out_dim, layers, hidden, dropout, gamma)
        widths = self._widths()
        self.linears = nn.ModuleList(nn.Linear(a, b, bias=False) for a, b in zip(widths[:-1], widths[1:]))
        self.biases = nn.ParameterList(nn.Parameter(torch.zeros(b)) for b in widths[1:])

    def forward(self, x, propagation=None, generator=None):
        self._check_width(x)
        if propagation is None:
            raise InputError("GCN needs a propagation matrix")
        h = x
        for i, (linear, bias) in enumerate(zip(self.linears, self.biases)):
            h = torch.sparse.mm(propagation, linear(h)) + bias
            if i < len(self.linears) - 1:
                h = self._drop(torch.relu(h), generator)
        return h


class SGC(GraphModel):
    """Linear model S^L x W + b with a single collapsed weight; `hidden` and dropout are unused."""
    architecture = "sgc"

    def __init__(self, in_dim, out_dim, layers=2, hidden=32, dropout=0.0, gamma=1.0) -> None:
        super().__init__(in_dim, out_dim, layers, hidden, dropout, gamma)
        self.linear = nn.Linear(in_dim, out_dim)

    def forward(self, x, propagation=None, generator=None):
        self._check_width(x)
        if propagation is None:
            raise InputError("SGC needs a propagation matrix")
        h = x
        for _ in range(self.n_layers):
            h = torch.sparse.mm(propagation, h)
        return self.linear(h)


MODELS = ModelFactory()
MODELS.register("mlp", MLP)
MODELS.register("gcn", GCN)
MODELS.register("sgc", SGC)


def build_model(architecture, in_dim, out_dim, layers=2, hidden=32, dropout=0.0, gamma=1.0, seed=0):
    """
    Seeded fp64 model construction.

    Returns:
    - GraphModel
    """
    torch.manual_seed(seed)
    model = MODELS(architecture, in_dim, out_dim, layers, hidden, dropout, gamma)
    return model.double()


class Tape:
    """
    Record of one forward pass: the input features, the seed logits and the parameters.

    A tape can be swept backward once unless the sweep retains it.
    """
    def __init__(self, inputs, outputs, parameters) -> None:
        self.inputs = inputs
        self.outputs = outputs
        self.parameters = parameters
        self.consumed = False


class Gradients:
    """Gradients of one backward sweep."""
    def __init__(self, parameters, features) -> None:
        self.parameters = parameters
        self.features = features


def forward(model, batch, generator=None):
    """
    Logits at the batch seeds together with the tape needed for a backward sweep.

    Parameters:
    - model (GraphModel): The model.
    - batch (EgoBatch): A batch sampled with features.
    - generator (torch.Generator | None): Dropout randomness, training only.

    Returns:
    - tuple(torch.Tensor, Tape): seeds x classes logits and the tape.
    """
    x = batch.feature_tensor().requires_grad_(True)
    propagation = None if model.architecture == "mlp" else batch.propagation(model.gamma)
    logits = model(x, propagation, generator)[torch.as_tensor(batch.seed_index)]
    return logits, Tape(x, logits, list(model.named_parameters()))


def backward(tape, loss_grad, retain=False):
    """
    Reverse sweep from the seed logits.

    Parameters:
    - tape (Tape): Tape of a forward pass.
    - loss_grad (torch.Tensor): Gradient of the scalar objective with respect to the
      seed logits; a one-hot tensor selects a single logit component.
    - retain (bool): Keep the tape usable for another sweep.

    Returns:
    - Gradients: per-parameter gradients (by name) and the input-feature gradient.

    Raises:
    - StateError: If the tape was already consumed.
    """
    if tape.consumed:
        raise StateError("Tape was already consumed by a backward sweep")
    loss_grad = torch.as_tensor(loss_grad, dtype=tape.outputs.dtype)
    if loss_grad.shape != tape.outputs.shape:
        raise InputError(f"loss_grad shape {tuple(loss_grad.shape)} does not match logits {tuple(tape.outputs.shape)}")
    names = [name for name, _ in tape.parameters]
    targets = [tape.inputs] + [p for _, p in tape.parameters]
    grads = torch.autograd.grad(tape.outputs, targets, grad_outputs=loss_grad,
                                retain_graph=retain, allow_unused=True)
    grads = [torch.zeros_like(t) if gr is None else gr for t, gr in zip(targets, grads)]
    if not retain:
        tape.consumed = True
    return Gradients(dict(zip(names, grads[1:])), grads[0])
