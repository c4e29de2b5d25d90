"""Closed-form parameter and MAC accounting.

Formulas are written out per layer type rather than read back from the model's
shape table, so they can be cross-checked against both the weight manifest
(params) and an instrumented forward pass (MACs).

MAC convention: one multiply + one add. Softmax, activations, norms, residual
adds and pooling are not counted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from hit.ablation import AblationSpec
from hit.backbone import SHRINK, ModelConfig, embed_channels
from hit.head import BRANCH_DEPTH, branch_channels

BACKBONE_PARTS = ("embed", "stage1", "sa1", "stage2", "sa2", "stage3")


@dataclass
class CostReport:
    variant: str
    params: int = 0
    macs: int = 0
    param_breakdown: dict[str, int] = field(default_factory=dict)
    mac_breakdown: dict[str, int] = field(default_factory=dict)

    def add(self, part: str, params: int, macs: int) -> None:
        self.param_breakdown[part] = self.param_breakdown.get(part, 0) + params
        self.mac_breakdown[part] = self.mac_breakdown.get(part, 0) + macs
        self.params += params
        self.macs += macs

    @property
    def backbone_params(self) -> int:
        return sum(self.param_breakdown.get(p, 0) for p in BACKBONE_PARTS)

    @property
    def backbone_macs(self) -> int:
        return sum(self.mac_breakdown.get(p, 0) for p in BACKBONE_PARTS)


def linear_cost(tokens: int, n_in: int, n_out: int, bias: bool = True) -> tuple[int, int]:
    return n_in * n_out + (n_out if bias else 0), tokens * n_in * n_out


def conv_cost(out_positions: int, k: int, cin: int, cout: int, bias: bool = True) -> tuple[int, int]:
    return k * k * cin * cout + (cout if bias else 0), out_positions * k * k * cin * cout


def transpose_conv_cost(in_positions: int, k: int, cin: int, cout: int) -> tuple[int, int]:
    return k * k * cin * cout + cout, in_positions * k * k * cin * cout


def _sum(*costs: tuple[int, int]) -> tuple[int, int]:
    return sum(c[0] for c in costs), sum(c[1] for c in costs)


def _grids(cfg: ModelConfig, stage: int) -> tuple[int, int, int, int]:
    s = cfg.search_grid >> (stage - 1)
    t = cfg.template_grid >> (stage - 1)
    return s, t, s * s, t * t


def _table_size(cfg: ModelConfig, stage: int, heads: int, spec: AblationSpec) -> int:
    if not spec.pos_enc.relative:
        return 0
    s, t, _, _ = _grids(cfg, stage)
    return heads * (s + t) * (s + t)


def mha_cost(tokens: int, c: int, heads: int, d: int) -> tuple[int, int]:
    nd = heads * d
    proj = _sum(
        linear_cost(tokens, c, nd),
        linear_cost(tokens, c, nd),
        linear_cost(tokens, c, 2 * nd),
        linear_cost(tokens, 2 * nd, c),
    )
    attn_macs = heads * tokens * tokens * d + heads * tokens * tokens * 2 * d
    return proj[0], proj[1] + attn_macs


def mlp_cost(tokens: int, c: int, ratio: int) -> tuple[int, int]:
    return _sum(linear_cost(tokens, c, ratio * c), linear_cost(tokens, ratio * c, c))


def shrink_cost(t_in: int, t_out: int, c: int, c_next: int, heads: int, d: int) -> tuple[int, int]:
    nd = heads * d
    proj = _sum(
        linear_cost(t_out, c, nd),
        linear_cost(t_in, c, nd),
        linear_cost(t_in, c, 4 * nd),
        linear_cost(t_out, 4 * nd, c_next),
    )
    attn_macs = heads * t_out * t_in * d + heads * t_out * t_in * 4 * d
    return proj[0], proj[1] + attn_macs


def cost_report(cfg: ModelConfig, spec: AblationSpec = AblationSpec()) -> CostReport:
    rep = CostReport(cfg.variant)

    ch = embed_channels(cfg.channels[0])
    p = m = 0
    for i in range(4):
        pos = (cfg.search_size >> (i + 1)) ** 2 + (cfg.template_size >> (i + 1)) ** 2
        cp, cm = conv_cost(pos, 3, ch[i], ch[i + 1])
        p += cp + 2 * ch[i + 1]  # explicit per-channel scale and shift
        m += cm
    rep.add("embed", p, m)

    for s in range(3):
        _, _, ns, nt = _grids(cfg, s + 1)
        tokens = ns + nt
        c, heads = cfg.channels[s], cfg.mha_heads[s]
        attn = mha_cost(tokens, c, heads, cfg.key_dim)
        mlp = mlp_cost(tokens, c, cfg.mlp_ratio)
        table = _table_size(cfg, s + 1, heads, spec)
        rep.add(f"stage{s + 1}", cfg.blocks[s] * (attn[0] + mlp[0] + table), cfg.blocks[s] * (attn[1] + mlp[1]))
        if s < 2:
            _, _, ns2, nt2 = _grids(cfg, s + 2)
            t_out = ns2 + nt2
            cn = cfg.channels[s + 1]
            if spec.downsample == SHRINK:
                down = shrink_cost(tokens, t_out, c, cn, cfg.sa_heads[s], cfg.key_dim)
                down = (down[0] + _table_size(cfg, s + 1, cfg.sa_heads[s], spec), down[1])
            else:
                down = linear_cost(t_out, c, cn)
            rep.add(f"sa{s + 1}", *_sum(down, mlp_cost(t_out, cn, cfg.mlp_ratio)))

    c1, c2, c3 = cfg.channels
    g = cfg.search_grid
    b = spec.bridge
    up1, up2 = b.upsamplers()
    parts = []
    if up1:
        parts.append(transpose_conv_cost((g // 4) ** 2, 2, c3, c2))
    if up2:
        parts.append(transpose_conv_cost((g // 2) ** 2, 2, c2, c1))
    rep.add("bridge", *_sum((0, 0), *parts))

    positions = g * g
    width = cfg.head_channels
    parts = []
    if spec.use_g:
        parts.append(linear_cost(1, c3, c1))
        parts.append((0, positions * c1))  # score of every position against the projected G
    parts.append(conv_cost(positions, 1, c1, width))
    bc = branch_channels(width)
    for _ in ("tl", "br"):
        for k in range(BRANCH_DEPTH):
            parts.append(conv_cost(positions, 3, bc[k], bc[k + 1]))
        parts.append(conv_cost(positions, 1, bc[-1], 1))
    rep.add("head", *_sum(*parts))
    return rep


def count_params(cfg: ModelConfig, spec: AblationSpec = AblationSpec()) -> int:
    return cost_report(cfg, spec).params


def count_macs(cfg: ModelConfig, spec: AblationSpec = AblationSpec()) -> int:
    return cost_report(cfg, spec).macs
