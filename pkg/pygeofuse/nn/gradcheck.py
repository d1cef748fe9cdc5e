# pygeofuse/nn/gradcheck.py

"""
Central finite-difference verification of the analytic gradients.

Every differentiable operation has a named check; `run_gradcheck_suite`
runs the checks of one scope and reports the worst relative error of each.
"""

import time
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from ..bench.weather import WeatherCondition
from ..errors import ConfigurationError
from .attention import AttnBlockParams, MhaConfig, attn_block, mha
from .encoder import CaptionEncoder, EncoderConfig, ImageEncoder, WeatherCaption, encode_caption, encode_image
from .fusion import FusionConfig, FusionParams, channel_cross_fuse, fuse_pair, token_cross_fuse, token_self_refine
from .layers import Module
from .losses import (
    ClassifierHead,
    ItmHead,
    build_anchor_set,
    class_contrastive_loss,
    image_text_losses,
    instance_ce_loss,
    positive_mask,
    similarity_matrices,
    total_loss,
)
from .model import GeoFuseModel, ModelConfig
from .objective import Batch, ObjectiveSettings, batch_losses
from .tensor import (
    Parameter,
    Tensor,
    backward,
    clamp_min,
    concat,
    div,
    exp,
    gelu,
    index,
    l2_normalize,
    layer_norm,
    log,
    log_softmax_last_axis,
    matmul,
    no_grad,
    reshape,
    sigmoid,
    softmax_last_axis,
    stack,
    tensor_mean,
    tensor_sum,
    transpose,
    zero_grad,
)

SCOPES = ("all", "core", "attention", "fusion", "losses", "encoder")
DEFAULT_TOL = 1e-4
DEFAULT_STEP = 1e-5


class GradCheckRow(NamedTuple):
    scope: str
    operation: str
    max_rel_error: float
    passed: bool


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - b| / max(1, max |a|, max |b|)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    scale = max(1.0, float(np.abs(a).max()), float(np.abs(b).max()))
    return float(np.abs(a - b).max() / scale)


def finite_diff_grad(f: Callable[[], Tensor], param: Parameter, coords: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences of the scalar `f()` along the flat coordinates `coords` of `param`."""
    flat = param.data.reshape(-1)
    out = np.empty(len(coords))
    with no_grad():
        for position, coord in enumerate(coords):
            saved = flat[coord]
            flat[coord] = saved + h
            f_plus = f().item()
            flat[coord] = saved - h
            f_minus = f().item()
            flat[coord] = saved
            out[position] = (f_plus - f_minus) / (2.0 * h)
    return out


def check_gradients(
    f: Callable[[], Tensor],
    parameters: Mapping[str, Parameter],
    h: float = DEFAULT_STEP,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Compare `backward` against central differences.

    Parameters
    ----------
    `f` : callable
        Builds the scalar loss from the current parameter values.
    `parameters` : mapping of name to Parameter
        The leaves to check; frozen Parameters are skipped.
    `max_coords` : int, optional
        Check a seeded sample of at most this many coordinates per
        Parameter instead of all of them.

    Returns
    -------
    Maximum relative error per Parameter name.
    """
    live = {name: p for name, p in parameters.items() if not p.frozen}
    zero_grad(live)
    analytic = backward(f(), live)
    rng = np.random.default_rng(seed)
    errors = {}
    for name, param in live.items():
        coords = np.arange(param.size)
        if max_coords is not None and param.size > max_coords:
            coords = np.sort(rng.choice(param.size, size=max_coords, replace=False))
        numeric = finite_diff_grad(f, param, coords, h)
        errors[name] = relative_error(analytic[name].data.reshape(-1)[coords], numeric)
    zero_grad(live)
    return errors


class _Check(NamedTuple):
    operation: str
    build: Callable[[np.random.Generator], Tuple[Callable[[], Tensor], Dict[str, Parameter], Optional[int]]]


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return tensor_sum(out * Tensor(weights))


def _unary(op: Callable[[Tensor], Tensor], low: float = -2.0, high: float = 2.0, shape=(3, 4)):
    def build(rng):
        x = Parameter("x", rng.uniform(low, high, size=shape))
        weights = rng.normal(size=op(Tensor(x.data)).shape)
        return (lambda: _weighted(op(x), weights)), {"x": x}, None
    return build


def _binary(op: Callable[[Tensor, Tensor], Tensor], shape_a=(3, 4), shape_b=(3, 4), b_low: float = -2.0):
    def build(rng):
        a = Parameter("a", rng.uniform(-2.0, 2.0, size=shape_a))
        b = Parameter("b", rng.uniform(b_low, 2.0, size=shape_b))
        weights = rng.normal(size=op(Tensor(a.data), Tensor(b.data)).shape)
        return (lambda: _weighted(op(a, b), weights)), {"a": a, "b": b}, None
    return build


def _away_from(value: float):
    def op(x):
        return clamp_min(x, value)

    def build(rng):
        data = rng.uniform(-2.0, 2.0, size=(3, 4))
        data[np.abs(data - value) < 0.1] += 0.3
        x = Parameter("x", data)
        weights = rng.normal(size=data.shape)
        return (lambda: _weighted(op(x), weights)), {"x": x}, None
    return build


def _layer_norm(rng):
    x = Parameter("x", rng.normal(size=(3, 5)))
    gamma = Parameter("gamma", rng.normal(1.0, 0.2, size=5))
    beta = Parameter("beta", rng.normal(size=5))
    weights = rng.normal(size=(3, 5))
    return (lambda: _weighted(layer_norm(x, gamma, beta), weights)), {"x": x, "gamma": gamma, "beta": beta}, None


def _module_params(module: Module, extra: Optional[Dict[str, Parameter]] = None) -> Dict[str, Parameter]:
    params = dict(module.named_parameters())
    params.update(extra or {})
    return params


def _core_checks() -> List[_Check]:
    return [
        _Check("add", _binary(lambda a, b: a + b, shape_b=(4,))),
        _Check("sub", _binary(lambda a, b: a - b)),
        _Check("mul", _binary(lambda a, b: a * b, shape_b=(4,))),
        _Check("div", _binary(div, b_low=0.5)),
        _Check("matmul", _binary(matmul, shape_b=(4, 2))),
        _Check("transpose", _unary(transpose)),
        _Check("reshape", _unary(lambda x: reshape(x, (2, 6)))),
        _Check("index", _unary(lambda x: index(x, (np.array([0, 2, 2]), np.array([1, 3, 1]))))),
        _Check("concat", _binary(lambda a, b: concat([a, b], axis=0))),
        _Check("stack", _binary(lambda a, b: index(stack([a, b]), 1) * a)),
        _Check("sum", _unary(lambda x: tensor_sum(x, axis=1))),
        _Check("mean", _unary(lambda x: tensor_mean(x, axis=0))),
        _Check("exp", _unary(exp)),
        _Check("log", _unary(log, low=0.5)),
        _Check("clamp_min", _away_from(0.0)),
        _Check("sigmoid", _unary(sigmoid)),
        _Check("gelu", _unary(gelu)),
        _Check("softmax", _unary(softmax_last_axis)),
        _Check("log_softmax", _unary(log_softmax_last_axis)),
        _Check("layer_norm", _layer_norm),
        _Check("l2_normalize", _unary(l2_normalize)),
    ]


def _attention_checks(n: int = 4, d: int = 8, heads: int = 2) -> List[_Check]:
    def build(post_norm: bool, whole_block: bool):
        def _build(rng):
            config = MhaConfig(d_model=d, heads=heads, post_norm=post_norm)
            params = AttnBlockParams(config, rng)
            q = Parameter("q", rng.normal(size=(n, d)))
            kv = Parameter("kv", rng.normal(size=(n + 1, d)))
            weights = rng.normal(size=(n, d))
            if whole_block:
                f = lambda: _weighted(attn_block(q, kv, params, config), weights)
            else:
                f = lambda: _weighted(mha(q, kv, kv, params, config), weights)
            return f, _module_params(params, {"q": q, "kv": kv}), None
        return _build

    return [
        _Check("mha", build(True, False)),
        _Check("attn_block_post_norm", build(True, True)),
        _Check("attn_block_pre_norm", build(False, True)),
    ]


def _fusion_checks(n: int = 4, d: int = 8, heads: int = 2) -> List[_Check]:
    def build(stage: str):
        def _build(rng):
            params = FusionParams(FusionConfig(num_tokens=n, d_model=d, heads=heads, channel_heads=heads), rng)
            f_s = Parameter("f_s", rng.normal(size=(n, d)))
            f_r = Parameter("f_r", rng.normal(size=(n, d)))
            stages = {
                "token_cross_fuse": lambda: token_cross_fuse(f_s, f_r, params),
                "token_self_refine": lambda: token_self_refine(f_s, params),
                "channel_cross_fuse": lambda: channel_cross_fuse(f_s, f_r, params),
                "fuse_pair": lambda: fuse_pair(f_s, f_r, params),
            }
            weights = rng.normal(size=stages[stage]().shape)
            extra = {"f_s": f_s} if stage == "token_self_refine" else {"f_s": f_s, "f_r": f_r}
            return (lambda: _weighted(stages[stage](), weights)), _module_params(params, extra), None
        return _build

    return [_Check(stage, build(stage)) for stage in ("token_cross_fuse", "token_self_refine", "channel_cross_fuse", "fuse_pair")]


def _loss_checks(batch: int = 4, classes: int = 3, d: int = 8) -> List[_Check]:
    labels = ["0", "1", "2", "1"][:batch]
    label_ids = np.array([int(label) for label in labels])

    def class_contrastive(rng):
        drone = Parameter("drone", rng.normal(size=(batch, d)))
        sat = Parameter("sat_anchor", rng.normal(size=(classes, d)))
        fused = Parameter("fused_anchor", rng.normal(size=(classes, d)))
        mask = positive_mask(labels, [str(c) for c in range(classes)])

        def f():
            sims = similarity_matrices(l2_normalize(drone), l2_normalize(sat), l2_normalize(fused), 0.5)
            return class_contrastive_loss(sims, mask).total

        return f, {"drone": drone, "sat_anchor": sat, "fused_anchor": fused}, None

    def instance_ce(rng):
        head = ClassifierHead(d, classes, rng)
        feats = {name: Parameter(name, rng.normal(size=(batch, d))) for name in ("drone", "sat", "fused")}
        f = lambda: instance_ce_loss(feats["drone"], feats["sat"], feats["fused"], label_ids, head)
        return f, _module_params(head, feats), None

    def image_text(rng):
        itm = ItmHead(d, rng)
        drone = Parameter("drone", rng.normal(size=(batch, d)))
        text = Parameter("text", rng.normal(size=(batch, d)))
        conditions = [0, 1, 2, 3][:batch]
        f = lambda: image_text_losses(l2_normalize(drone), l2_normalize(text), conditions, itm, 0.5).total
        return f, _module_params(itm, {"drone": drone, "text": text}), None

    def total(rng):
        parts = {name: Parameter(name, rng.normal()) for name in ("l_it", "l_ce", "l_cc")}
        f = lambda: total_loss(parts["l_it"], parts["l_ce"], parts["l_cc"], 0.1)
        return f, parts, None

    return [
        _Check("class_contrastive_loss", class_contrastive),
        _Check("instance_ce_loss", instance_ce),
        _Check("image_text_losses", image_text),
        _Check("total_loss", total),
    ]


def _encoder_checks(d: int = 8, heads: int = 2) -> List[_Check]:
    def image(rng):
        config = EncoderConfig(image_size=8, patch_size=4, d_model=d, depth=1, heads=heads)
        params = ImageEncoder(config, rng)
        head = ClassifierHead(d, 3, rng)
        picture = rng.uniform(0.0, 1.0, size=(8, 8, 3))
        weights = rng.normal(size=d)
        f = lambda: _weighted(encode_image(picture, config, params, head)[1], weights)
        params.assign_names()
        return f, _module_params(params, {f"head.{k}": v for k, v in head.named_parameters()}), None

    def caption(rng):
        params = CaptionEncoder(d, rng)
        weights = rng.normal(size=d)
        f = lambda: _weighted(encode_caption(WeatherCaption(WeatherCondition.FOG_SNOW, 1), params), weights)
        return f, _module_params(params), None

    return [_Check("encode_image", image), _Check("encode_caption", caption)]


def _pipeline_check(rng):
    """Fusion plus the full objective on a (N=4, D=8, H=2) model."""
    model = GeoFuseModel(ModelConfig(
        num_classes=3, image_size=8, patch_size=4, d_model=8, depth=1, heads=2, channel_heads=2,
        seed=int(rng.integers(1 << 31)),
    ))
    classes = ["0", "1", "2"]
    satellites = {c: rng.uniform(0.0, 1.0, size=(8, 8, 3)) for c in classes}
    roadmaps = {c: rng.uniform(0.0, 1.0, size=(8, 8, 3)) for c in classes}
    anchors = build_anchor_set([(c, [satellites[c]], [roadmaps[c]]) for c in classes], model)
    labels = ["0", "2", "1"]
    batch = Batch(
        labels=labels,
        label_ids=np.array([int(label) for label in labels]),
        drones=[rng.uniform(0.0, 1.0, size=(8, 8, 3)) for _ in labels],
        satellites=[satellites[label] for label in labels],
        auxiliaries=[roadmaps[label] for label in labels],
        captions=[
            WeatherCaption(WeatherCondition.FOG, 0),
            WeatherCaption(WeatherCondition.DARK, 1),
            WeatherCaption(WeatherCondition.RAIN, 2),
        ],
    )
    settings = ObjectiveSettings(lam=0.1, tau=0.5)
    f = lambda: batch_losses(model, batch, anchors, settings).total
    return f, dict(model.named_parameters()), 6


_SUITE = {
    "core": _core_checks,
    "attention": _attention_checks,
    "fusion": _fusion_checks,
    "losses": _loss_checks,
    "encoder": _encoder_checks,
}


def run_gradcheck_suite(
    scope: str = "all",
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    h: float = DEFAULT_STEP,
    log: Optional[Callable[[str], None]] = None,
) -> List[GradCheckRow]:
    """
    Run the named checks of `scope` and return one row per operation.

    Scope `all` also runs the end-to-end pipeline check.
    """
    if scope not in SCOPES:
        raise ConfigurationError(f"Unknown gradcheck scope {scope}; expected one of {SCOPES}")
    if tol < 0:
        raise ConfigurationError(f"tol is {tol} but must be >= 0")

    selected = [(name, checks()) for name, checks in _SUITE.items() if scope in ("all", name)]
    if scope == "all":
        selected.append(("pipeline", [_Check("fusion_and_total_loss", _pipeline_check)]))

    rows = []
    for position, (name, checks) in enumerate(selected):
        for number, check in enumerate(checks):
            rng = np.random.default_rng([seed, position, number])
            started = time.perf_counter()
            f, parameters, max_coords = check.build(rng)
            errors = check_gradients(f, parameters, h=h, max_coords=max_coords, seed=seed)
            worst = max(errors.values()) if errors else 0.0
            rows.append(GradCheckRow(name, check.operation, worst, worst <= tol))
            if log is not None:
                log(f"{name:<10} {check.operation:<24} max_rel_error={worst:.3e} ({time.perf_counter() - started:.2f}s)")
    return rows
