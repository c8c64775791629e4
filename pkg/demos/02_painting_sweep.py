"""
Over- and under-prediction on the painting example
==================================================

80 people, women paint 75% of the time and men 25%. A model is perfect on
men and labels a fraction x of women as painting. Which metrics can tell
x < 0.75 apart from x > 0.75?
"""

from biasamp.scenarios import fig2_sweep

table = fig2_sweep()
names = ["fpr_difference", "tpr_difference", "accuracy_difference", "mean_subgroup_accuracy", "at"]

print("x      " + "  ".join(f"{n[:12]:>12s}" for n in names))
for i in range(0, 41, 5):
    row = "  ".join(f"{table.values[n][i]:12.4f}" for n in names)
    print(f"{table.x[i]:.3f}  {row}")

# Accuracy-based metrics are mirror images around 0.75: they see that the
# model is wrong but not in which direction. FPR and TPR differences each see
# only one side. The directional score is signed and linear in x.
lo, hi = table.values["accuracy_difference"][20], table.values["accuracy_difference"][40]
print(f"\naccuracy difference at x=0.5 and x=1.0: {lo:.4f} {hi:.4f}")
print("A->T at x=0.5 and x=1.0:", table.values["at"][20], table.values["at"][40])
