"""Case assembly and run orchestration: configs, geometry, training, evaluation.

A case is described by a line-oriented sectioned text config::

    [case]
    name heat_quad
    pde heat                      # heat | ns | poisson

    [mesh]
    source file boundary.txt      # or: rect W H | annulus r R | vessel
    n_xi 41
    n_eta 41
    tol 1e-10
    max_iter 200000
    sor 1.8

    [bc]
    bc T bottom dirichlet 1.0     # bc <var> <edge> dirichlet <v>|neumann <v>|periodic <edge>|outflow
    bc T bottom dirichlet param   # 'param' substitutes the per-point parameter value

    [pde]
    nu 0.05                       # ns only
    loss_weight continuity 1.0
    input coords                  # coords | bc_interp | source

    [params]
    kind fixed                    # fixed | list | sources
    train 1 7                     # list kind: training parameter values
    test 2 3 4 5 6
    n_train 256                   # sources kind
    n_test 64
    kl_modes 10
    sigma0 100.0
    length_scale 0.5
    sample_seed 1

    [train]
    iterations 1300
    batch_size 1
    lr 0.001
    seed 0
    hidden 16 16 16
    activation tanh

The training loop is single-threaded and fully deterministic for a fixed
config and seed: history logs and checkpoints are byte-identical across
runs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import bcpad, gpfield, meshgen, model, oracle, physics
from .bcpad import BCSpec, EdgeCondition
from .grid import (
    EDGE_NAMES,
    BoundaryCurves,
    CurvilinearMesh,
    GridError,
    GridField,
    ReferenceGrid,
    TransformMetrics,
    read_boundary_file,
    write_field_file,
    write_mesh_file,
)

PDE_VARIABLES = {"heat": ("T",), "ns": ("u", "v", "p"), "poisson": ("T",)}


class ConfigError(GridError):
    pass


# ---------------------------------------------------------------------------
# Geometry generators
# ---------------------------------------------------------------------------


def resample_arclength(points: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline at n points uniform in arc length (endpoints kept)."""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.hypot(*(pts[1:] - pts[:-1]).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        raise GridError("degenerate polyline")
    targets = np.linspace(0.0, s[-1], n)
    out = np.stack(
        [np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])], axis=1
    )
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def rectangle_boundary(n_xi: int, n_eta: int, width: float, height: float,
                       x0: float = 0.0, y0: float = 0.0) -> BoundaryCurves:
    xs = x0 + np.linspace(0.0, width, n_xi)
    ys = y0 + np.linspace(0.0, height, n_eta)
    return BoundaryCurves(
        edges={
            "bottom": np.stack([xs, np.full(n_xi, y0)], axis=1),
            "top": np.stack([xs, np.full(n_xi, y0 + height)], axis=1),
            "left": np.stack([np.full(n_eta, x0), ys], axis=1),
            "right": np.stack([np.full(n_eta, x0 + width), ys], axis=1),
        }
    )


def annulus_boundary(n_xi: int, n_eta: int, r: float, big_r: float,
                     center: tuple[float, float] = (0.0, 0.0)) -> BoundaryCurves:
    """Cut annulus: inner circle is the bottom edge, the cut runs along +x."""
    cx, cy = center
    theta = np.linspace(0.0, 2.0 * np.pi, n_xi)
    bottom = np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=1)
    top = np.stack([cx + big_r * np.cos(theta), cy + big_r * np.sin(theta)], axis=1)
    bottom[-1] = bottom[0]
    top[-1] = top[0]
    cut = np.stack([cx + np.linspace(r, big_r, n_eta), np.full(n_eta, cy)], axis=1)
    cut[0] = bottom[0]
    cut[-1] = top[0]
    return BoundaryCurves(
        edges={"bottom": bottom, "top": top, "left": cut.copy(), "right": cut.copy()},
        periodic=("left", "right"),
    )


def vessel_boundary(n_xi: int, n_eta: int, s: float) -> BoundaryCurves:
    """Idealized vessel with stenosis (s > 0) or aneurysm (s < 0) walls.

    Wall curves: x_left = s cos(2 pi y) - 0.5, x_right = -s cos(2 pi y) + 0.5
    for y in [-0.25, 0.25]; flat inlet (bottom) and outlet (top).
    """
    if not -0.1 <= s <= 0.1:
        raise GridError(f"vessel parameter s={s} outside [-0.1, 0.1]")
    yy = np.linspace(-0.25, 0.25, 4 * max(n_eta, 64))
    left = np.stack([s * np.cos(2.0 * np.pi * yy) - 0.5, yy], axis=1)
    right = np.stack([-s * np.cos(2.0 * np.pi * yy) + 0.5, yy], axis=1)
    left = resample_arclength(left, n_eta)
    right = resample_arclength(right, n_eta)
    bottom = np.stack([np.linspace(left[0, 0], right[0, 0], n_xi),
                       np.full(n_xi, -0.25)], axis=1)
    top = np.stack([np.linspace(left[-1, 0], right[-1, 0], n_xi),
                    np.full(n_xi, 0.25)], axis=1)
    bottom[0] = left[0]
    bottom[-1] = right[0]
    top[0] = left[-1]
    top[-1] = right[-1]
    return BoundaryCurves(edges={"bottom": bottom, "top": top, "left": left, "right": right})


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


@dataclass
class RawConfig:
    sections: dict[str, list[tuple[int, str]]]
    path: str

    def get(self, section: str, key: str, default=None, required: bool = False):
        for lineno, line in self.sections.get(section, []):
            parts = line.split()
            if parts[0] == key:
                return parts[1:] if len(parts) > 2 else parts[1]
        if required:
            raise ConfigError(f"{self.path}: missing '{key}' in section [{section}]")
        return default

    def lines(self, section: str):
        return self.sections.get(section, [])


def parse_config(path) -> RawConfig:
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections.setdefault(current, [])
                continue
            if current is None:
                raise ConfigError(f"{path}:{lineno}: entry outside any section: {line!r}")
            sections[current].append((lineno, line))
    return RawConfig(sections=sections, path=str(path))


@dataclass
class BCLine:
    variable: str
    edge: str
    kind: str
    value: float | str | None  # float, or "param" placeholder
    partner: str | None


def parse_bc_lines(cfg: RawConfig, variables: tuple[str, ...]) -> list[BCLine]:
    out = []
    for lineno, line in cfg.lines("bc"):
        parts = line.split()
        where = f"{cfg.path}:{lineno}"
        if parts[0] != "bc" or len(parts) < 4:
            raise ConfigError(f"{where}: malformed bc line: {line!r}")
        var, edge, kind = parts[1], parts[2], parts[3]
        if var not in variables:
            raise ConfigError(f"{where}: unknown variable {var!r} (have {variables})")
        if edge not in EDGE_NAMES:
            raise ConfigError(f"{where}: unknown edge {edge!r}")
        value = None
        partner = None
        if kind in ("dirichlet", "neumann"):
            if len(parts) != 5:
                raise ConfigError(f"{where}: {kind} needs exactly one value: {line!r}")
            value = parts[4] if parts[4] == "param" else _parse_float(parts[4], where)
        elif kind == "periodic":
            if len(parts) != 5 or parts[4] not in EDGE_NAMES:
                raise ConfigError(f"{where}: periodic needs a partner edge: {line!r}")
            partner = parts[4]
        elif kind == "outflow":
            if len(parts) != 4:
                raise ConfigError(f"{where}: outflow takes no value: {line!r}")
        else:
            raise ConfigError(f"{where}: unknown bc kind {kind!r}")
        out.append(BCLine(var, edge, kind, value, partner))
    return out


def _parse_float(tok: str, where: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {tok!r}") from None


def materialize_bcspecs(bc_lines: list[BCLine], variables: tuple[str, ...],
                        param_value: float | None) -> dict[str, BCSpec]:
    specs = {}
    for var in variables:
        conditions: dict[str, EdgeCondition] = {}
        for line in bc_lines:
            if line.variable != var:
                continue
            if line.edge in conditions:
                raise ConfigError(f"variable {var!r} edge {line.edge!r} set twice")
            value = line.value
            if value == "param":
                if param_value is None:
                    raise ConfigError("bc uses 'param' but the case has no parameter")
                value = float(param_value)
            conditions[line.edge] = EdgeCondition(kind=line.kind, values=value,
                                                  partner=line.partner)
        missing = [e for e in EDGE_NAMES if e not in conditions]
        if missing:
            raise ConfigError(f"variable {var!r} has no condition on edges {missing}")
        specs[var] = BCSpec(conditions=conditions)
    return specs


# ---------------------------------------------------------------------------
# Case definition
# ---------------------------------------------------------------------------


@dataclass
class Hyper:
    iterations: int
    batch_size: int
    lr: float
    seed: int
    hidden: tuple[int, ...] = (16, 16, 16)
    activation: str = "relu"
    conv_pad: str = "zeros"
    checkpoint_every: int = 0


@dataclass
class ParameterPoint:
    label: str
    mesh: CurvilinearMesh
    metrics: TransformMetrics
    input: np.ndarray  # (c_in, n_eta, n_xi)
    bcspecs: dict[str, BCSpec]
    source: np.ndarray | None = None
    value: float | None = None


@dataclass
class CaseDefinition:
    name: str
    pde: str
    variables: tuple[str, ...]
    train_points: list[ParameterPoint]
    test_points: list[ParameterPoint]
    hyper: Hyper
    fluid: physics.FluidParams | None = None
    loss_weights: np.ndarray | None = None
    input_kind: str = "coords"
    kl_basis: gpfield.KLBasis | None = None
    config_path: str = ""

    @property
    def c_in(self) -> int:
        return self.train_points[0].input.shape[0]


def _build_input(kind: str, mesh: CurvilinearMesh, bcspecs: dict[str, BCSpec],
                 source: np.ndarray | None) -> np.ndarray:
    if kind == "coords":
        return np.stack([mesh.x, mesh.y])
    if kind == "bc_interp":
        # linear interpolation between the bottom-edge and top-edge values
        spec = next(iter(bcspecs.values()))
        lo = bcpad._edge_values(spec.conditions["bottom"].values, mesh.ref.n_xi, "bottom")
        hi = bcpad._edge_values(spec.conditions["top"].values, mesh.ref.n_xi, "top")
        w = np.linspace(0.0, 1.0, mesh.ref.n_eta)[:, None]
        return ((1.0 - w) * lo[None, :] + w * hi[None, :])[None]
    if kind == "source":
        if source is None:
            raise ConfigError("input kind 'source' needs a source field")
        return source[None]
    raise ConfigError(f"unknown input kind {kind!r}")


def _mesh_from_config(cfg: RawConfig, param_value: float | None) -> CurvilinearMesh:
    src = cfg.get("mesh", "source", required=True)
    n_xi = int(cfg.get("mesh", "n_xi", required=True))
    n_eta = int(cfg.get("mesh", "n_eta", required=True))
    tol = float(cfg.get("mesh", "tol", 1e-10))
    max_iter = int(cfg.get("mesh", "max_iter", 200000))
    sor = float(cfg.get("mesh", "sor", 1.8))
    if isinstance(src, str):
        src = [src]
    kind = src[0]
    if kind == "file":
        path = os.path.join(os.path.dirname(cfg.path), src[1])
        bc = read_boundary_file(path)
        if bc.n_xi != n_xi or bc.n_eta != n_eta:
            raise ConfigError(
                f"{cfg.path}: boundary file is {bc.n_xi}x{bc.n_eta}, "
                f"config wants {n_xi}x{n_eta}"
            )
    elif kind == "rect":
        bc = rectangle_boundary(n_xi, n_eta, float(src[1]), float(src[2]))
    elif kind == "annulus":
        bc = annulus_boundary(n_xi, n_eta, float(src[1]), float(src[2]))
    elif kind == "vessel":
        s = float(src[1]) if len(src) > 1 else param_value
        if s is None:
            raise ConfigError("vessel geometry needs a parameter value (s)")
        bc = vessel_boundary(n_xi, n_eta, float(s))
    else:
        raise ConfigError(f"{cfg.path}: unknown mesh source {kind!r}")
    ref = ReferenceGrid(n_xi, n_eta)
    return meshgen.generate_mapping(bc, ref, tol=tol, max_iter=max_iter, sor=sor)


def build_case(path) -> CaseDefinition:
    """Parse a config file and assemble meshes, metrics, inputs, and BCs."""
    cfg = parse_config(path)
    name = cfg.get("case", "name", required=True)
    pde = cfg.get("case", "pde", required=True)
    if pde not in PDE_VARIABLES:
        raise ConfigError(f"{cfg.path}: unknown pde {pde!r}")
    variables = PDE_VARIABLES[pde]
    bc_lines = parse_bc_lines(cfg, variables)
    input_kind = cfg.get("pde", "input", "coords")

    fluid = None
    if pde == "ns":
        nu = float(cfg.get("pde", "nu", required=True))
        inlet = cfg.get("pde", "inlet", ["0.0", "1.0"])
        fluid = physics.FluidParams(nu=nu, inlet_velocity=(float(inlet[0]), float(inlet[1])))
    weights = np.ones(len(physics.EQUATION_CHANNELS[pde]))
    for lineno, line in cfg.lines("pde"):
        parts = line.split()
        if parts[0] == "loss_weight":
            channels = physics.EQUATION_CHANNELS[pde]
            if len(parts) != 3 or parts[1] not in channels:
                raise ConfigError(f"{cfg.path}:{lineno}: bad loss_weight line: {line!r}")
            weights[channels.index(parts[1])] = float(parts[2])

    hyper = Hyper(
        iterations=int(cfg.get("train", "iterations", required=True)),
        batch_size=int(cfg.get("train", "batch_size", 1)),
        lr=float(cfg.get("train", "lr", 0.001)),
        seed=int(cfg.get("train", "seed", 0)),
        hidden=tuple(int(v) for v in _as_list(cfg.get("train", "hidden", ["16", "16", "16"]))),
        activation=cfg.get("train", "activation", "relu"),
        conv_pad=cfg.get("train", "conv_pad", "zeros"),
        checkpoint_every=int(cfg.get("train", "checkpoint_every", 0)),
    )

    kind = cfg.get("params", "kind", "fixed")
    kl_basis = None
    src = _as_list(cfg.get("mesh", "source", required=True))
    geometry_is_param = src[0] == "vessel" and len(src) == 1

    def point(label: str, value: float | None, mesh: CurvilinearMesh,
              metrics: TransformMetrics, source: np.ndarray | None = None) -> ParameterPoint:
        specs = materialize_bcspecs(bc_lines, variables, value)
        inp = _build_input(input_kind, mesh, specs, source)
        return ParameterPoint(label=label, mesh=mesh, metrics=metrics, input=inp,
                              bcspecs=specs, source=source, value=value)

    train_points: list[ParameterPoint] = []
    test_points: list[ParameterPoint] = []

    if kind == "fixed":
        mesh = _mesh_from_config(cfg, None)
        metrics = meshgen.compute_metrics(mesh)
        train_points.append(point("fixed", None, mesh, metrics))
        test_points.append(train_points[0])
    elif kind == "list":
        train_vals = [float(v) for v in _as_list(cfg.get("params", "train", required=True))]
        test_vals = [float(v) for v in _as_list(cfg.get("params", "test", required=True))]
        if set(train_vals) & set(test_vals):
            raise ConfigError(f"{cfg.path}: train and test parameter sets overlap")
        shared_mesh = None
        shared_metrics = None
        if not geometry_is_param:
            shared_mesh = _mesh_from_config(cfg, None)
            shared_metrics = meshgen.compute_metrics(shared_mesh)
        for vals, target in ((train_vals, train_points), (test_vals, test_points)):
            for v in vals:
                if geometry_is_param:
                    mesh = _mesh_from_config(cfg, v)
                    metrics = meshgen.compute_metrics(mesh)
                else:
                    mesh, metrics = shared_mesh, shared_metrics
                target.append(point(f"{v:g}", v, mesh, metrics))
    elif kind == "sources":
        mesh = _mesh_from_config(cfg, None)
        metrics = meshgen.compute_metrics(mesh)
        n_train = int(cfg.get("params", "n_train", required=True))
        n_test = int(cfg.get("params", "n_test", required=True))
        k = int(cfg.get("params", "kl_modes", 10))
        gp = gpfield.GPConfig(
            sigma0=float(cfg.get("params", "sigma0", 100.0)),
            length_scale=float(cfg.get("params", "length_scale", 0.5)),
            truncation=k,
        )
        sample_seed = int(cfg.get("params", "sample_seed", 1))
        kernel = gpfield.build_kernel_matrix(mesh, gp)
        kl_basis = gpfield.kl_decompose(kernel, k, shape=mesh.shape)
        fields = gpfield.sample_many(kl_basis, n_train + n_test, seed=sample_seed)
        for i in range(n_train):
            train_points.append(point(f"train{i}", None, mesh, metrics, source=fields[i]))
        for i in range(n_test):
            test_points.append(
                point(f"test{i}", None, mesh, metrics, source=fields[n_train + i])
            )
    else:
        raise ConfigError(f"{cfg.path}: unknown params kind {kind!r}")

    if hyper.batch_size > len(train_points):
        raise ConfigError(
            f"{cfg.path}: batch_size {hyper.batch_size} exceeds "
            f"{len(train_points)} training points"
        )
    return CaseDefinition(
        name=name, pde=pde, variables=variables, train_points=train_points,
        test_points=test_points, hyper=hyper, fluid=fluid, loss_weights=weights,
        input_kind=input_kind, kl_basis=kl_basis, config_path=str(path),
    )


def _as_list(v):
    return v if isinstance(v, list) else [v]


# ---------------------------------------------------------------------------
# Forward evaluation, training, evaluation
# ---------------------------------------------------------------------------


def enforce_point(raw: np.ndarray, pt: ParameterPoint,
                  variables: tuple[str, ...]) -> np.ndarray:
    """Apply hard BC enforcement to one raw output (n_vars, H, W)."""
    out = np.empty_like(raw)
    for k, var in enumerate(variables):
        out[k] = bcpad.enforce(raw[k], pt.bcspecs[var], pt.metrics)
    return out


def point_residual(fields: np.ndarray, pt: ParameterPoint, case: CaseDefinition) -> np.ndarray:
    if case.pde == "heat":
        return physics.heat_residual(fields[0], pt.metrics)
    if case.pde == "poisson":
        return physics.poisson_residual(fields[0], pt.source, pt.metrics)
    return physics.ns_residual(fields[0], fields[1], fields[2], case.fluid, pt.metrics)


def point_residual_backward(grad_res: np.ndarray, fields: np.ndarray,
                            pt: ParameterPoint, case: CaseDefinition) -> np.ndarray:
    out = np.zeros_like(fields)
    if case.pde == "heat":
        out[0] = physics.heat_residual_backward(grad_res, pt.metrics)
    elif case.pde == "poisson":
        out[0] = physics.poisson_residual_backward(grad_res, pt.metrics)
    else:
        gu, gv, gp = physics.ns_residual_backward(
            grad_res, fields[0], fields[1], case.fluid, pt.metrics
        )
        out[0], out[1], out[2] = gu, gv, gp
    return out


@dataclass
class TrainResult:
    checkpoint_path: str
    history_path: str
    final_loss: float
    iterations: int
    net: model.ConvNet = field(repr=False, default=None)


def _batch_schedule(n_points: int, batch_size: int, iterations: int, seed: int):
    """Deterministic batch index sequence: whole set, or per-epoch shuffles."""
    if batch_size >= n_points:
        full = np.arange(n_points)
        for _ in range(iterations):
            yield full
        return
    rng = np.random.default_rng(seed + 1)
    order = np.array([], dtype=np.intp)
    pos = 0
    for _ in range(iterations):
        if pos + batch_size > len(order):
            order = rng.permutation(n_points)
            pos = 0
        yield order[pos : pos + batch_size]
        pos += batch_size


def train(case: CaseDefinition, out_dir, net: model.ConvNet | None = None) -> TrainResult:
    """Run the configured iteration budget; emit checkpoint + history CSV."""
    os.makedirs(out_dir, exist_ok=True)
    hyper = case.hyper
    if net is None:
        net = model.ConvNet(case.variables, case.c_in, hyper.hidden, hyper.activation,
                            hyper.conv_pad)
        model.init_weights(net, hyper.seed)
    state = model.AdamState(lr=hyper.lr)
    channels = physics.EQUATION_CHANNELS[case.pde]
    history_path = os.path.join(out_dir, "history.csv")
    ckpt_path = os.path.join(out_dir, "checkpoint.bin")
    eligible = physics.eligible_mask(case.train_points[0].metrics)
    schedule = _batch_schedule(len(case.train_points), hyper.batch_size,
                               hyper.iterations, hyper.seed)
    last_good = None
    final_loss = float("nan")
    with open(history_path, "w") as hist:
        hist.write("iteration,loss," + ",".join(f"res_{c}" for c in channels) + "\n")
        for it, idx in enumerate(schedule):
            batch = [case.train_points[i] for i in idx]
            inputs = np.stack([p.input for p in batch])
            raw = net.forward(inputs)
            grad_raw = np.zeros_like(raw)
            loss = 0.0
            ms_sum = np.zeros(len(channels))
            for b, pt in enumerate(batch):
                fields = enforce_point(raw[b], pt, case.variables)
                res = point_residual(fields, pt, case)
                ms = physics.residual_mean_squares(res, eligible)
                ms_sum += ms
                loss += float(np.dot(case.loss_weights, ms))
                g_res = physics.physics_loss_grad(res, eligible, len(batch),
                                                  case.loss_weights)
                g_fields = point_residual_backward(g_res, fields, pt, case)
                for k, var in enumerate(case.variables):
                    grad_raw[b, k] = bcpad.enforce_backward(g_fields[k],
                                                            pt.bcspecs[var], pt.metrics)
            loss /= len(batch)
            ms_sum /= len(batch)
            if not np.isfinite(loss):
                if last_good is not None:
                    net_params = dict(net.parameters())
                    for name, arr in last_good[0].items():
                        net_params[name][...] = arr
                    model.save_checkpoint(ckpt_path, net, last_good[1], it)
                raise physics.GridError(
                    f"non-finite loss at iteration {it}; last good checkpoint saved"
                )
            grads = net.backward(grad_raw)
            model.adam_step(state, net.parameters(), grads)
            hist.write(f"{it},{loss!r}," + ",".join(repr(v) for v in ms_sum) + "\n")
            final_loss = loss
            last_good = ({n: a.copy() for n, a in net.parameters()}, state)
            if hyper.checkpoint_every and (it + 1) % hyper.checkpoint_every == 0:
                model.save_checkpoint(ckpt_path, net, state, it + 1)
    model.save_checkpoint(ckpt_path, net, state, hyper.iterations)
    return TrainResult(checkpoint_path=ckpt_path, history_path=history_path,
                       final_loss=final_loss, iterations=hyper.iterations, net=net)


def predict_point(net: model.ConvNet, pt: ParameterPoint,
                  case: CaseDefinition) -> np.ndarray:
    raw = net.forward(pt.input[None], retain=False)
    return enforce_point(raw[0], pt, case.variables)


def oracle_reference(pt: ParameterPoint, case: CaseDefinition,
                     tol: float = 1e-8) -> np.ndarray | None:
    """Classical solve for heat/poisson points; None where no oracle exists."""
    if case.pde == "ns":
        return None
    spec = pt.bcspecs["T"]
    if case.pde == "heat":
        sol = oracle.solve_heat(pt.mesh, pt.metrics, spec, tol=tol)
    else:
        sol = oracle.solve_poisson(pt.mesh, pt.metrics, spec, pt.source, tol=tol)
    return sol.field


@dataclass
class EvalRow:
    label: str
    errors: dict[str, float]  # per-variable sqrt-ratio error (empty for NS)
    plain_ratio: dict[str, float]
    residual_ms: np.ndarray


def evaluate(net: model.ConvNet, case: CaseDefinition,
             points: list[ParameterPoint] | None = None,
             out_dir=None, oracle_tol: float = 1e-8) -> list[EvalRow]:
    """Forward pass per parameter point; error vs oracle where one exists."""
    if points is None:
        points = case.test_points
    eligible = physics.eligible_mask(case.train_points[0].metrics)
    rows = []
    for pt in points:
        fields = predict_point(net, pt, case)
        res = point_residual(fields, pt, case)
        ms = physics.residual_mean_squares(res, eligible)
        errors = {}
        plain = {}
        ref = oracle_reference(pt, case, tol=oracle_tol)
        if ref is not None:
            err, ratio = physics.relative_error_components(fields[0], ref)
            errors["T"] = err
            plain["T"] = ratio
        rows.append(EvalRow(label=pt.label, errors=errors, plain_ratio=plain,
                            residual_ms=ms))
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            fld = GridField(values=fields, names=case.variables)
            write_field_file(os.path.join(out_dir, f"{case.name}_{pt.label}.field"), fld)
            write_mesh_file(os.path.join(out_dir, f"{case.name}_{pt.label}.mesh"), pt.mesh)
            if ref is not None:
                write_field_file(
                    os.path.join(out_dir, f"{case.name}_{pt.label}.oracle"),
                    GridField(values=ref[None], names=("T",)),
                )
    return rows
