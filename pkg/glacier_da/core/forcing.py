"""Surface mass balance forcing."""

from __future__ import annotations

import numpy as np

from glacier_da.core.models import ModelParams


def smb_forcing(t: float, p: ModelParams) -> float:
    """Surface mass balance P(t), m ice/yr.

    Linear glide through ``(0, smb_o)``, ``(t_mid, smb_1)`` and
    ``(t_end, smb_f)``; held flat outside ``[0, t_end]``.
    """
    return float(np.interp(t, (0.0, p.t_mid, p.t_end), (p.smb_o, p.smb_1, p.smb_f)))
