"""Fixed-format MPS export for MipModel.

No solver is bundled; the exported file plus the companion name map
lets any external MIP solver work the model, and check_solution can
then audit the returned values. The writer emits the NAME, ROWS,
COLUMNS, RHS, BOUNDS, and ENDATA sections, one coefficient per line,
with binaries wrapped in INTORG/INTEND marker lines and declared BV.

Fixed-format fields cap names at 8 characters, so rows become R0000001,
R0000002, ... in constraint order (the objective row is OBJ) and
columns become C0000001, ... in variable order. The mapping back to the
model's names is written next to the file as <stem>.names.json.
"""

import json


def names_path(path):
    """Companion name-map path: the .mps suffix swapped for .names.json."""
    path = str(path)
    stem = path[:-4] if path.endswith(".mps") else path
    return stem + ".names.json"


def _num(x):
    x = float(x)
    if x == 0.0:
        return "0.0"  # normalizes -0.0
    return repr(x)


def _line(f1="", f2="", f3="", f4="", f5=""):
    out = " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8)
    if f4 != "" or f5 != "":
        out += "  " + f4.ljust(12)
        if f5 != "":
            out += "   " + f5.ljust(8)
    return out.rstrip()


def export_mps(model, path, name="PERSTREE"):
    """Write the model at path (fixed MPS) plus its name map.

    The output is deterministic: exporting an identical model twice
    produces identical bytes.
    """
    rows = {}
    for idx, con in enumerate(model.constraints, start=1):
        rows[con.name] = f"R{idx:07d}"
    cols = {}
    for idx, var in enumerate(model.variables, start=1):
        cols[var.name] = f"C{idx:07d}"
    obj_coef = dict(model.objective)
    by_col = {v.name: [] for v in model.variables}
    for con in model.constraints:
        for vname, coef in con.coeffs:
            by_col[vname].append((rows[con.name], coef))

    sense_tag = {"<=": "L", ">=": "G", "=": "E"}
    lines = ["NAME" + " " * 10 + name, "ROWS", _line("N", "OBJ")]
    for con in model.constraints:
        lines.append(_line(sense_tag[con.sense], rows[con.name]))

    lines.append("COLUMNS")
    marker = 0
    integral = False
    for var in model.variables:
        want = var.kind == "binary"
        if want != integral:
            marker += 1
            tag = "'INTORG'" if want else "'INTEND'"
            lines.append(_line("", f"MARK{marker:04d}", "'MARKER'", "", tag))
            integral = want
        cname = cols[var.name]
        if var.name in obj_coef:
            lines.append(_line("", cname, "OBJ", _num(obj_coef[var.name])))
        for rname, coef in by_col[var.name]:
            lines.append(_line("", cname, rname, _num(coef)))
    if integral:
        marker += 1
        lines.append(_line("", f"MARK{marker:04d}", "'MARKER'", "", "'INTEND'"))

    lines.append("RHS")
    for con in model.constraints:
        if con.rhs != 0.0:
            lines.append(_line("", "RHS", rows[con.name], _num(con.rhs)))

    lines.append("BOUNDS")
    for var in model.variables:
        cname = cols[var.name]
        if var.kind == "binary":
            lines.append(_line("BV", "BND", cname))
        else:
            if var.lower != 0.0:
                lines.append(_line("LO", "BND", cname, _num(var.lower)))
            if var.upper != float("inf"):
                lines.append(_line("UP", "BND", cname, _num(var.upper)))
    lines.append("ENDATA")

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    name_map = {
        "objective": "OBJ",
        "rows": {tag: orig for orig, tag in rows.items()},
        "columns": {tag: orig for orig, tag in cols.items()},
    }
    with open(names_path(path), "w", encoding="ascii", newline="\n") as fh:
        json.dump(name_map, fh, indent=2)
        fh.write("\n")
