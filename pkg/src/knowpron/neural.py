"""Learnable primitives: token embeddings with a pinned zero row for
out-of-vocabulary tokens, a bidirectional LSTM encoder, rectifier feed-forward
stacks, inverted dropout with an explicit generator, and a finite-difference
gradient checker."""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn


class NeuralError(ValueError):
    pass


def seeded_generator(seed: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(int(seed))
    return g


def init_uniform_(tensor: torch.Tensor, generator: torch.Generator, scale: float = 0.1) -> None:
    with torch.no_grad():
        tensor.uniform_(-scale, scale, generator=generator)


def load_pretrained_vectors(path: str | Path) -> dict[str, list[float]]:
    """Whitespace-separated text format: ``word v1 ... vd`` per line."""
    vectors: dict[str, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                vectors[parts[0]] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise NeuralError(f"{path}:{lineno}: bad vector value") from exc
    dims = {len(v) for v in vectors.values()}
    if len(dims) > 1:
        raise NeuralError(f"{path}: inconsistent vector dimensions {sorted(dims)}")
    return vectors


class EmbeddingProvider(nn.Module):
    """Token lookup table.  Index 0 is the out-of-vocabulary slot; its row is
    zero-initialized and receives no gradient, so OOV tokens always map to the
    all-zeros vector."""

    def __init__(self, vocabulary: list[str], dim: int, generator: torch.Generator,
                 pretrained_path: str | Path | None = None) -> None:
        super().__init__()
        if len(set(vocabulary)) != len(vocabulary):
            raise NeuralError("vocabulary contains duplicates")
        self.vocabulary = list(vocabulary)
        self.dim = dim
        self.mode = "pretrained_file" if pretrained_path else "trainable_random"
        self._index = {w: i + 1 for i, w in enumerate(self.vocabulary)}
        self.table = nn.Embedding(len(self.vocabulary) + 1, dim, padding_idx=0)
        init_uniform_(self.table.weight, generator)
        with torch.no_grad():
            self.table.weight[0].zero_()
            if pretrained_path:
                vectors = load_pretrained_vectors(pretrained_path)
                some = next(iter(vectors.values()), None)
                if some is not None and len(some) != dim:
                    raise NeuralError(
                        f"pretrained vectors have dimension {len(some)}, expected {dim}")
                for word, vec in vectors.items():
                    idx = self._index.get(word)
                    if idx is not None:
                        self.table.weight[idx] = torch.tensor(vec, dtype=self.table.weight.dtype)

    def indices(self, tokens: list[str]) -> torch.Tensor:
        return torch.tensor([self._index.get(t, 0) for t in tokens], dtype=torch.long)

    def forward(self, tokens: list[str]) -> torch.Tensor:
        if not tokens:
            return self.table.weight.new_zeros((0, self.dim))
        return self.table(self.indices(tokens))


class FeedForward(nn.Module):
    """Rectifier MLP; dropout applies to hidden activations only."""

    def __init__(self, input_dim: int, hidden_dims: list[int], output_dim: int,
                 generator: torch.Generator) -> None:
        super().__init__()
        self.input_dim = input_dim
        self.output_dim = output_dim
        dims = [input_dim] + list(hidden_dims) + [output_dim]
        self.layers = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(len(dims) - 1))
        for layer in self.layers:
            init_uniform_(layer.weight, generator)
            init_uniform_(layer.bias, generator)

    def forward(self, x: torch.Tensor, dropout_rate: float = 0.0,
                training: bool = False, rng: torch.Generator | None = None) -> torch.Tensor:
        if x.shape[-1] != self.input_dim:
            raise NeuralError(f"input dimension {x.shape[-1]}, expected {self.input_dim}")
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = torch.relu(x)
                x = dropout(x, dropout_rate, training, rng)
        return x


class BiLstmEncoder(nn.Module):
    def __init__(self, input_dim: int, hidden_dim: int, generator: torch.Generator) -> None:
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.lstm = nn.LSTM(input_dim, hidden_dim, bidirectional=True)
        for param in self.lstm.parameters():
            init_uniform_(param, generator)

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Encode ``(T, input_dim)`` or a padded batch ``(T, B, input_dim)``;
        every output position depends on the whole sequence."""
        if x.dim() == 2:
            if x.shape[0] == 0:
                raise NeuralError("cannot encode an empty sequence")
            out, _ = self.lstm(x.unsqueeze(1))
            return out.squeeze(1)
        if x.shape[0] == 0:
            raise NeuralError("cannot encode an empty sequence")
        out, _ = self.lstm(x)
        return out


def dropout(x: torch.Tensor, rate: float, training: bool,
            rng: torch.Generator | None = None) -> torch.Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-rate) during training;
    identity when not training."""
    if not 0.0 <= rate < 1.0:
        raise NeuralError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (torch.rand(x.shape, generator=rng, dtype=x.dtype) >= rate).to(x.dtype)
    return x * keep / (1.0 - rate)


def check_finite(module: nn.Module) -> None:
    for name, param in module.named_parameters():
        if not torch.isfinite(param).all():
            raise NeuralError(f"parameter {name!r} contains non-finite values")


def gradient_check(named_params: list[tuple[str, torch.Tensor]], loss_fn,
                   step: float = 1e-5, floor: float = 1e-5) -> dict[str, float]:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` must be a deterministic closure over the given parameters
    (dropout off, fixed inputs).  Returns the max relative error per array;
    the relative error of an element pair (a, f) is |a-f| / max(|a|, |f|,
    floor), so disagreements far below ``floor`` in magnitude do not register.
    """
    named_params = list(named_params)
    loss = loss_fn()
    grads = torch.autograd.grad(loss, [p for _, p in named_params], allow_unused=True)
    errors: dict[str, float] = {}
    with torch.no_grad():
        for (name, param), grad in zip(named_params, grads):
            analytic = torch.zeros_like(param) if grad is None else grad
            flat = param.view(-1)
            fd = torch.zeros_like(flat)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                f_plus = float(loss_fn())
                flat[i] = orig - step
                f_minus = float(loss_fn())
                flat[i] = orig
                fd[i] = (f_plus - f_minus) / (2.0 * step)
            a = analytic.view(-1)
            denom = torch.clamp(torch.maximum(a.abs(), fd.abs()), min=floor)
            errors[name] = float(((a - fd).abs() / denom).max()) if flat.numel() else 0.0
    return errors
