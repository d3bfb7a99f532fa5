"""Exit from the boundary saddle (5, 0) under the three regime orderings.

Runs a small version of the exit-time experiment and prints the audit row
that supplies the non-degeneracy witnesses.  In the audit table the case
columns hold the regime that witnesses each case (empty when none does).
"""

from fastswitch import ExitSpec, RegimeSpec, assumption_audit, exit_time_experiment, paper_example_model

model = paper_example_model()
audit = assumption_audit(model, [[0.0, 6.0], [0.0, 6.0]])
print(audit.to_text())

spec = ExitSpec((5.0, 0.0), theta1=0.1, theta3=0.5, H=20.0, n_paths=500)
for tag, pairs in {"case1": [(1e-1, 1e-1), (1e-2, 1e-2)],
                   "case2": [(1e-2, 1e-2), (1e-2, 1e-3)],
                   "case3": [(1e-2, 1e-2), (1e-3, 1e-2)]}.items():
    rep = exit_time_experiment(model, spec, RegimeSpec(pairs, tag), h=1e-3)
    print(rep.to_text())
