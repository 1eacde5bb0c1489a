"""How precision-oriented thresholding works, on a list you can read.

Sorts scored predictions by confidence, walks every admissible cut point,
and shows which prefix each precision target retains.

    python3 demos/threshold_playground.py
"""

from kbcomplete import ThresholdCurve, recall_at_precision

# (first-token confidence, was the answer correct against gold?)
items = [
    (0.97, True),
    (0.95, True),
    (0.93, True),
    (0.90, True),
    (0.88, False),   # one early mistake caps the 95% target
    (0.80, True),
    (0.74, True),
    (0.74, True),    # tie: no threshold can split these two
    (0.60, False),
    (0.41, True),
    (0.33, False),
    (0.21, False),
]

curve = ThresholdCurve(items)
print(f"{'m':>3} {'confidence':>11} {'correct':>8} {'prefix precision':>17}")
for m, ((confidence, correct), precision) in enumerate(
    zip(curve.items, curve.prefix_precisions), start=1
):
    print(f"{m:>3} {confidence:>11.2f} {str(correct):>8} {precision:>17.3f}")

print()
for target in (0.95, 0.90, 0.75):
    coverage, threshold = recall_at_precision(items, target)
    if coverage == 0.0:
        print(f"P>{target:.2f}: nothing retainable")
        continue
    kept = round(coverage * len(items))
    print(
        f"P>{target:.2f}: keep {kept}/{len(items)} predictions "
        f"(coverage {coverage:.2f}) at threshold {threshold:.2f}"
    )

print(
    "\nNote the coverage at 0.90 is at least the coverage at 0.95: a lower"
    "\nbar never retains fewer predictions."
)
