"""Training harness: Adam, step-decay schedule, per-graph gradient
accumulation, and the desk-scale ablation suite.

Runs are deterministic given the config seed: identical configs produce
bitwise-identical metrics. For that reason the metrics CSV carries a
fixed 0.0 in its seconds column; real wall-clock timing lives on the
returned Metrics object and the run summary printed by the CLI.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .layers import LayerSpec, Model, model_param_count

__all__ = [
    "TrainConfig", "Metrics", "TrainingDiverged", "adam_init", "adam_step",
    "step_lr", "graph_loss", "train", "evaluate", "constant_baseline_mae",
    "triangle_model_specs", "pick_matched_width", "ablation_suite",
    "ABLATION_FIELDS", "write_csv", "read_csv", "worker_count",
]

ABLATION_FIELDS = ("model", "s", "re_sum", "seed", "test_mae", "median_test_mae")
METRICS_FIELDS = ("model", "s", "re_sum", "seed", "epoch", "train_loss",
                  "valid_loss", "test_metric", "seconds")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 0.005
    lr_step_size: int = 30
    lr_decay: float = 0.8
    seed: int = 0
    loss: str = "MAE"
    readout: str = "SUM"

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss not in ("MAE", "MSE", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class Metrics:
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)
    test_metric: float = float("nan")
    seconds: float = 0.0


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


def adam_init(params):
    return {
        "m": [np.zeros_like(p.data) for p in params],
        "v": [np.zeros_like(p.data) for p in params],
        "t": 0,
    }


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard Adam update with bias correction; mutates params and state."""
    state["t"] += 1
    t = state["t"]
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.data.shape}")
        state["m"][i] = beta1 * state["m"][i] + (1 - beta1) * g
        state["v"][i] = beta2 * state["v"][i] + (1 - beta2) * (g * g)
        m_hat = state["m"][i] / (1 - beta1 ** t)
        v_hat = state["v"][i] / (1 - beta2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


def step_lr(epoch, config):
    return config.lr * config.lr_decay ** (epoch // config.lr_step_size)


def graph_loss(model, graph, loss_kind):
    """Scalar loss tensor for one graph (graph carries its own target)."""
    pred = model.forward(graph)
    if loss_kind == "cross_entropy":
        probs = T.softmax_rows(pred)
        onehot = np.zeros((1, pred.data.shape[1]))
        onehot[0, int(graph.target)] = 1.0
        picked = T.sum_all(T.elementwise_mul(probs, T.Tensor(onehot)))
        return T.scale(T.log(picked), -1.0)
    target = T.Tensor([[float(graph.target)]])
    diff = T.sub(pred, target)
    if loss_kind == "MSE":
        return T.sum_all(T.elementwise_mul(diff, diff))
    return T.sum_all(T.abs_(diff))  # MAE


def evaluate(model, graphs, loss_kind="MAE"):
    """MAE for regression, accuracy for cross_entropy; never mutates params."""
    if not graphs:
        return float("nan")
    if loss_kind == "cross_entropy":
        correct = sum(
            int(np.argmax(model.forward(g).data)) == int(g.target) for g in graphs)
        return correct / len(graphs)
    total = 0.0
    for g in graphs:
        total += abs(model.forward(g).data.item() - float(g.target))
    return total / len(graphs)


def _mean_loss(model, graphs, loss_kind):
    return sum(graph_loss(model, g, loss_kind).data.item() for g in graphs) / len(graphs)


def train(specs, dataset, config, head_dim=1):
    """Train a model over the dataset's train split; deterministic per seed.

    Gradients accumulate per graph up to batch_size, then one Adam step on
    the batch mean. The returned model carries the best-validation-epoch
    parameters (final parameters when there is no validation split).
    """
    t0 = time.perf_counter()
    train_graphs = dataset.subset("train")
    if not train_graphs:
        raise ValueError("empty train split")
    valid_graphs = dataset.subset("valid")
    test_graphs = dataset.subset("test")

    model = Model(specs, seed=config.seed, head_dim=head_dim,
                  readout_mode=config.readout)
    params = model.params()
    state = adam_init(params)
    rng = np.random.default_rng(config.seed)
    metrics = Metrics()
    best_valid = float("inf")
    best_snapshot = None

    for epoch in range(config.epochs):
        lr = step_lr(epoch, config)
        order = rng.permutation(len(train_graphs))
        epoch_loss = 0.0
        pending = 0
        batch_index = 0
        model.zero_grad()
        for gi in order:
            tape = T.Tape()
            model.watch(tape)
            loss = graph_loss(model, train_graphs[gi], config.loss)
            value = loss.data.item()
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, batch_index)
            epoch_loss += value
            tape.backward(loss)
            pending += 1
            if pending == config.batch_size:
                _apply_batch(params, state, lr, pending)
                model.zero_grad()
                pending = 0
                batch_index += 1
        if pending:
            _apply_batch(params, state, lr, pending)
            model.zero_grad()
        metrics.train_loss.append(epoch_loss / len(train_graphs))
        if valid_graphs:
            vloss = _mean_loss(model, valid_graphs, config.loss)
            metrics.valid_loss.append(vloss)
            if vloss < best_valid:
                best_valid = vloss
                best_snapshot = [p.data.copy() for p in params]
        else:
            metrics.valid_loss.append(float("nan"))

    if best_snapshot is not None:
        for p, data in zip(params, best_snapshot):
            p.data = data
    metrics.test_metric = evaluate(model, test_graphs, config.loss)
    metrics.seconds = time.perf_counter() - t0
    return model, metrics


def _apply_batch(params, state, lr, count):
    grads = [(p.grad if p.grad is not None else np.zeros_like(p.data)) / count
             for p in params]
    adam_step(params, grads, state, lr)


def constant_baseline_mae(dataset):
    """Test MAE of the predict-the-train-mean baseline."""
    train_targets = [g.target for g in dataset.subset("train")]
    mean = float(np.mean(train_targets))
    test = dataset.subset("test")
    return float(np.mean([abs(g.target - mean) for g in test])), mean


def triangle_model_specs(kind, width, s=1, re_sum=True, n_layers=2, d_in=1):
    """Two-layer model specs for the structure-only regression tasks."""
    specs = []
    for i in range(n_layers):
        di = d_in if i == 0 else width
        if kind == "GCN":
            specs.append(LayerSpec("GCN", di, width))
        elif kind == "GIN0":
            specs.append(LayerSpec("GIN0", di, width))
        elif kind == "EXPC":
            specs.append(LayerSpec("EXPC", di, width, s=s, re_sum=re_sum))
        elif kind == "COMBC":
            specs.append(LayerSpec("COMBC", di, width, re_sum=re_sum))
        else:
            raise ValueError(f"unsupported training layer kind {kind!r}")
    return specs


def _specs_param_count(specs, head_dim=1):
    return model_param_count(Model(specs, seed=0, head_dim=head_dim))


def pick_matched_width(kind, target_params, s=1, re_sum=True, n_layers=2,
                       max_width=192):
    """Width whose full-model parameter count comes closest to the target."""
    best_w, best_gap = 1, float("inf")
    for w in range(1, max_width + 1):
        count = _specs_param_count(triangle_model_specs(kind, w, s=s, re_sum=re_sum,
                                                        n_layers=n_layers))
        gap = abs(count - target_params)
        if gap < best_gap:
            best_w, best_gap = w, gap
        if count > 4 * target_params:
            break
    return best_w


def default_ablation_cells(budget_width=12, s_values=(4,), n_layers=2):
    """Table rows: ExpC*-1 / ExpC-1 / ExpC-s / CombC* / CombC / GCN, with
    widths chosen so every row's parameter count matches ExpC-1's budget."""
    budget = _specs_param_count(triangle_model_specs("EXPC", budget_width, s=1,
                                                     n_layers=n_layers))
    cells = [
        ("ExpC*-1", "EXPC", 1, False),
        ("ExpC-1", "EXPC", 1, True),
    ]
    cells += [(f"ExpC-{s}", "EXPC", s, True) for s in s_values]
    cells += [
        ("CombC*", "COMBC", 1, False),
        ("CombC", "COMBC", 1, True),
        ("GCN", "GCN", 1, True),
    ]
    out = []
    for label, kind, s, re_sum in cells:
        if kind == "EXPC" and s == 1 and re_sum:
            width = budget_width
        else:
            width = pick_matched_width(kind, budget, s=s, re_sum=re_sum,
                                       n_layers=n_layers)
        out.append({"model": label, "kind": kind, "s": s, "re_sum": re_sum,
                    "width": width, "n_layers": n_layers})
    return out, budget


def _run_cell(args):
    cell, dataset, config_kwargs, seed = args
    config = TrainConfig(seed=seed, **config_kwargs)
    specs = triangle_model_specs(cell["kind"], cell["width"], s=cell["s"],
                                 re_sum=cell["re_sum"],
                                 n_layers=cell.get("n_layers", 2))
    _, metrics = train(specs, dataset, config)
    return {"model": cell["model"], "s": cell["s"], "re_sum": cell["re_sum"],
            "seed": seed, "test_mae": metrics.test_metric}


def worker_count():
    env = os.environ.get("AGGLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ablation_suite(dataset, seeds, s_values=(4,), budget_width=12,
                   config_kwargs=None, cells=None):
    """Median test MAE per (model, s, re_sum) cell over the given seeds.

    Cells run in parallel across processes (capped by AGGLAB_THREADS);
    each run is independently seeded so the result does not depend on
    scheduling. Rows come back in canonical (model, seed) order with the
    cell median attached to every row.
    """
    if len(seeds) < 3:
        raise ValueError("ablation needs at least 3 seeds for a stable median")
    config_kwargs = dict(config_kwargs or {})
    if cells is None:
        cells, _ = default_ablation_cells(budget_width=budget_width, s_values=s_values)
    jobs = [(cell, dataset, config_kwargs, seed) for cell in cells for seed in seeds]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]
    by_cell = {}
    for row in rows:
        by_cell.setdefault(row["model"], []).append(row["test_mae"])
    for row in rows:
        row["median_test_mae"] = float(np.median(by_cell[row["model"]]))
    rows.sort(key=lambda r: (r["model"], r["seed"]))
    return rows


def write_csv(rows, path, fields):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in fields})


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return str(int(value))
    return value


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def metrics_rows(label, s, re_sum, seed, metrics):
    """Per-epoch rows in the metrics CSV schema. The seconds column is a
    fixed 0.0 so reruns with the same seed are byte-identical; wall-clock
    timing is reported separately."""
    rows = []
    for epoch, (tl, vl) in enumerate(zip(metrics.train_loss, metrics.valid_loss)):
        rows.append({
            "model": label, "s": s, "re_sum": re_sum, "seed": seed,
            "epoch": epoch, "train_loss": tl, "valid_loss": vl,
            "test_metric": metrics.test_metric, "seconds": 0.0,
        })
    return rows
