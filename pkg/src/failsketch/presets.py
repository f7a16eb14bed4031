"""Named experiment presets.

fig1..fig3 sweep the double-bitmap memory budget (2 / 1 / 0.5 Mbit per
direction, 300 logical bits) over 50,000 normal + 100 scanning hosts at
600 scans/min; fig4..fig6 compare both sketch kinds at equal memory
(5 / 2.5 / 1.25 Mbit per direction, width 512) over 500,000 + 1,000
hosts at 6,000 scans/min.  The full-scale presets draw per-host scan
rates from an exponential, like the original experiments.

Every preset has a `-desk` variant with host counts and memory divided
by ten (bits per host preserved) that finishes in seconds; desk presets
pin the scanner rate at its mean so that per-host relative error is
well defined against a stable truth, which is what the acceptance suite
measures.
"""

from __future__ import annotations

_FULL_51 = dict(normal_count=50_000, worm_count=100, worm_mean_rate=600.0)
_DESK_51 = dict(
    normal_count=5_000, worm_count=10, worm_mean_rate=600.0, worm_rate_model="fixed"
)
_FULL_52 = dict(
    normal_count=500_000, worm_count=1_000, worm_mean_rate=6_000.0, sketch="both",
    bitmap_logical=512, register_virtual=512,
)
_DESK_52 = dict(
    normal_count=50_000, worm_count=100, worm_mean_rate=6_000.0, sketch="both",
    bitmap_logical=512, register_virtual=512, worm_rate_model="fixed",
)

PRESETS: dict[str, dict] = {
    "fig1": {**_FULL_51, "bitmap_bits": 2_000_000},
    "fig2": {**_FULL_51, "bitmap_bits": 1_000_000},
    "fig3": {**_FULL_51, "bitmap_bits": 500_000},
    "fig4": {**_FULL_52, "bitmap_bits": 5_000_000, "register_count": 1_000_000},
    "fig5": {**_FULL_52, "bitmap_bits": 2_500_000, "register_count": 500_000},
    "fig6": {**_FULL_52, "bitmap_bits": 1_250_000, "register_count": 250_000},
    "fig1-desk": {**_DESK_51, "bitmap_bits": 200_000},
    "fig2-desk": {**_DESK_51, "bitmap_bits": 100_000},
    "fig3-desk": {**_DESK_51, "bitmap_bits": 50_000},
    "fig4-desk": {**_DESK_52, "bitmap_bits": 500_000, "register_count": 100_000},
    "fig5-desk": {**_DESK_52, "bitmap_bits": 250_000, "register_count": 50_000},
    "fig6-desk": {**_DESK_52, "bitmap_bits": 125_000, "register_count": 25_000},
}
