"""Constants"""
import sys

FROZEN = getattr(sys, 'frozen', False) and hasattr(sys, '_MEIPASS')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNEXPECTED_VERDICT = 2
EXIT_NUMERICAL = 3

WORKERS_ENV = "LDP_RENEWAL_WORKERS"

RATE_GRID_CSV = "rate_grid.csv"
RATE_SUMMARY_JSON = "rate_summary.json"
UPSILON_POINTS_CSV = "upsilon_points.csv"
RATE_CURVE_CSV = "rate_curve.csv"
RATE_CURVE_JSON = "rate_curve.json"
TAILS_JSON = "tails.json"

def report_json(which: str) -> str:
    return f"report_{which.replace('-', '_')}.json"

VERIFY_CHOICES = ("lower", "upper", "convex", "counterexample-open", "counterexample-closed", "supermult", "prop2",
                  "tails")
