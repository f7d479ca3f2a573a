import csv
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..ldp.common import ensure_path, format_real
from ..ldp.mc import RateCurveEntry
from ..ldp.rate import GridRow, RateValue

RATE_CURVE_HEADER = ["t", "p_hat", "ci_lo", "ci_hi", "rate", "rate_lo", "rate_hi", "hits", "n_runs"]

def w_header(dim: int) -> List[str]:
    return [f"w{i}" for i in range(1, dim + 1)]

def boolean(b: bool) -> str:
    return "true" if b else "false"

def _write(file: Union[Path, str], header: List[str], rows: Iterable[List[str]]):
    file = ensure_path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with file.open('w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)

def rate_grid_rows(rows: Sequence[GridRow]) -> List[List[str]]:
    return [[*map(format_real, r.w), format_real(r.beta_star), format_real(r.gamma_star), format_real(r.J),
             format_real(r.Upsilon1), format_real(r.I_lower), format_real(r.I_upper), boolean(r.converged)]
            for r in rows]

def write_rate_grid(file: Union[Path, str], rows: Sequence[GridRow], dim: int):
    header = w_header(dim) + ["beta_star", "gamma_star", "J", "Upsilon1", "I_lower", "I_upper", "converged"]
    _write(file, header, rate_grid_rows(rows))

def write_upsilon_points(file: Union[Path, str], points: Sequence[Tuple[float, np.ndarray, RateValue]], dim: int):
    rows = [[format_real(beta), *map(format_real, w), format_real(value.value), boolean(value.converged)]
            for beta, w, value in points]
    _write(file, ["beta"] + w_header(dim) + ["Upsilon", "converged"], rows)

def rate_curve_rows(entries: Sequence[RateCurveEntry]) -> List[List[str]]:
    return [[format_real(e.t), format_real(e.p_hat), format_real(e.ci_lo), format_real(e.ci_hi), format_real(e.rate),
             format_real(e.rate_lo), format_real(e.rate_hi), str(e.hits), str(e.n_runs)] for e in entries]

def write_rate_curve(file: Union[Path, str], entries: Sequence[RateCurveEntry]):
    _write(file, RATE_CURVE_HEADER, rate_curve_rows(entries))
