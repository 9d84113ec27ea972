"""Histogram-based regression tree grown on gradient/hessian statistics.

Trees are plain nested dicts (JSON-ready): internal nodes carry
``feature``, ``threshold`` (a bin upper edge), ``bin`` (its index),
``missing_left`` and the realized ``gain``; leaves carry ``value`` with the
learning rate already folded in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import Binning


@dataclass
class _Split:
    feature: int
    bin: int
    threshold: float
    missing_left: bool
    gain: float


def _leaf_value(G: float, H: float, lam: float, eta: float) -> float:
    denom = H + lam
    if denom <= 0.0:
        return 0.0
    return float(-eta * G / denom)


def _best_split(codes: np.ndarray, rows: np.ndarray, g: np.ndarray, h: np.ndarray,
                binning: Binning, lam: float, min_child_weight: float) -> _Split | None:
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    parent = G * G / (H + lam) if H + lam > 0 else 0.0
    best: _Split | None = None

    for f in range(codes.shape[1]):
        edges = binning.uppers[f]
        if len(edges) == 0:
            continue
        c = codes[rows, f]
        nb = len(edges) + 1                      # finite bins
        hced = np.bincount(c, weights=h[rows], minlength=nb + 1)
        gced = np.bincount(c, weights=g[rows], minlength=nb + 1)
        gm, hm = gced[nb], hced[nb]              # missing-bin sums
        gl = np.cumsum(gced[:nb - 1])            # left of split k: bins 0..k
        hl = np.cumsum(hced[:nb - 1])

        # evaluate both missing-bin routings; prefer missing-right on ties
        for missing_left, gL, hL in (
            (False, gl, hl),
            (True, gl + gm, hl + hm),
        ):
            gR = G - gL
            hR = H - hL
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = 0.5 * (gL * gL / (hL + lam) + gR * gR / (hR + lam) - parent)
            valid = ((hL >= min_child_weight) & (hR >= min_child_weight)
                     & (hL + lam > 0) & (hR + lam > 0))
            gains = np.where(valid, gains, -np.inf)
            k = int(np.argmax(gains))            # first max: lowest threshold
            if gains[k] > 0 and (best is None or gains[k] > best.gain):
                best = _Split(f, k, float(edges[k]), missing_left, float(gains[k]))
            if gm == 0 and hm == 0:
                break                            # no missing values: routings equal
    return best


def grow_tree(codes: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray,
              binning: Binning, max_depth: int, lam: float,
              min_child_weight: float, eta: float) -> dict:
    """Grow one depth-bounded tree greedily on histogram statistics."""

    def build(rows: np.ndarray, depth: int) -> dict:
        G = float(g[rows].sum())
        H = float(h[rows].sum())
        if depth >= max_depth or len(rows) < 2:
            return {"value": _leaf_value(G, H, lam, eta)}
        split = _best_split(codes, rows, g, h, binning, lam, min_child_weight)
        if split is None:
            return {"value": _leaf_value(G, H, lam, eta)}
        c = codes[rows, split.feature]
        left_mask = c <= split.bin
        if split.missing_left:
            left_mask |= c == binning.missing_code(split.feature)
        left_rows = rows[left_mask]
        right_rows = rows[~left_mask]
        if len(left_rows) == 0 or len(right_rows) == 0:
            return {"value": _leaf_value(G, H, lam, eta)}
        return {
            "feature": split.feature,
            "threshold": split.threshold,
            "bin": split.bin,
            "missing_left": split.missing_left,
            "gain": split.gain,
            "left": build(left_rows, depth + 1),
            "right": build(right_rows, depth + 1),
        }

    return build(rows, 0)


def predict_codes(node: dict, codes: np.ndarray, binning: Binning) -> np.ndarray:
    """Tree output for pre-binned rows (exactly matches raw-value traversal)."""
    out = np.empty(codes.shape[0])

    def walk(node: dict, rows: np.ndarray) -> None:
        if "value" in node:
            out[rows] = node["value"]
            return
        c = codes[rows, node["feature"]]
        left = c <= node["bin"]
        if node["missing_left"]:
            left |= c == binning.missing_code(node["feature"])
        walk(node["left"], rows[left])
        walk(node["right"], rows[~left])

    walk(node, np.arange(codes.shape[0]))
    return out


def predict_raw(node: dict, X: np.ndarray) -> np.ndarray:
    """Tree output for raw feature rows; NaN follows the stored missing side."""
    out = np.empty(X.shape[0])

    def walk(node: dict, rows: np.ndarray) -> None:
        if "value" in node:
            out[rows] = node["value"]
            return
        v = X[rows, node["feature"]]
        nan = np.isnan(v)
        with np.errstate(invalid="ignore"):
            left = v <= node["threshold"]
        left = np.where(nan, node["missing_left"], left)
        walk(node["left"], rows[left])
        walk(node["right"], rows[~left])

    walk(node, np.arange(X.shape[0]))
    return out


def collect_gains(node: dict, gains: np.ndarray) -> None:
    """Accumulate realized split gains per feature index into ``gains``."""
    if "value" in node:
        return
    gains[node["feature"]] += node["gain"]
    collect_gains(node["left"], gains)
    collect_gains(node["right"], gains)
