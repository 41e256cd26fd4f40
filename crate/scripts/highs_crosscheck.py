"""Solve every frozen cross-check model with HiGHS and write its optimum.

Usage: python3 scripts/highs_crosscheck.py [DIR]

DIR defaults to crates/core/tests/crosscheck. For each NAME.lp a NAME.sol is
written: an objective comment line (without the constant term, which the LP
file carries only as a comment) followed by one `column value` line per column.
"""

import pathlib
import sys

import highspy

TOLERANCES = {
    "mip_rel_gap": 0.0,
    "mip_abs_gap": 1e-9,
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
    "mip_feasibility_tolerance": 1e-9,
}


def solve(lp_path: pathlib.Path) -> None:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    for key, value in TOLERANCES.items():
        h.setOptionValue(key, value)
    if h.readModel(str(lp_path)) != highspy.HighsStatus.kOk:
        raise SystemExit(f"{lp_path}: HiGHS could not read the model")
    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        raise SystemExit(f"{lp_path}: {h.modelStatusToString(status)}")
    objective = h.getInfo().objective_function_value
    names = h.getLp().col_names_
    values = h.getSolution().col_value
    lines = [f"# objective {objective!r}", f"# solver HiGHS {highspy.Highs().version()}"]
    lines += [f"{name} {value!r}" for name, value in zip(names, values)]
    lp_path.with_suffix(".sol").write_text("\n".join(lines) + "\n")
    print(f"{lp_path.name}: {objective:.9f}")


def main() -> None:
    root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/crosscheck")
    models = sorted(root.glob("*.lp"))
    if not models:
        raise SystemExit(f"no .lp files in {root}")
    for lp_path in models:
        solve(lp_path)


if __name__ == "__main__":
    main()
