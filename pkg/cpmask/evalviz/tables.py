"""
Markdown tables of evaluation and ablation results
"""
from beautifultable import BeautifulTable
from typing import (
    Any,
    Callable,
    Dict,
    Mapping,
    Sequence
)

_alignment: Dict[str, Callable[[str], str]] = {
    "^": lambda a: f":{a[1:-1]}:",
    "<": lambda a: f":{a[1:]}",
    ">": lambda a: f"{a[:-1]}:",
}


def fmt_ap(val: Any) -> str:
    """
    AP in [0, 1] shown as points with one decimal, missing values as '-'
    """
    return "-" if val is None else f"{100 * val:.1f}"


def make_table(headers: Mapping[str, Mapping[str, str]], rows: Sequence[Mapping[str, Any]]) -> str:
    """
    Create a MarkDown table using the given header and row values
    :param headers: column name -> attributes ({'align': '<'|'^'|'>', 'key': row key})
    :param rows: row values keyed by column name or the column's 'key'
    :return: formatted MarkDown table
    """
    if not rows:
        return ""
    table = BeautifulTable(maxwidth=300, default_alignment=BeautifulTable.ALIGN_LEFT)
    table.set_style(BeautifulTable.STYLE_MARKDOWN)
    table.columns.header = list(headers.keys())
    for row in rows:
        cells = [row.get(attrs.get("key", name), "") for name, attrs in headers.items()]
        table.rows.append([str(c).replace("|", "\\|") for c in cells])

    table_rows = str(table).split("\n")
    head = dict(zip([h.strip() for h in table_rows[0].split("|")], table_rows[1].split("|")))
    alignment = [_alignment.get(headers[k].get("align", "<"))(v) for k, v in head.items() if k]
    table_rows[1] = f"|{'|'.join(alignment)}|"
    return "\n".join(table_rows) + "\n"


def report_table(report) -> str:
    """
    Per-category and aggregate AP of an EvalReport
    """
    headers = {
        "Category": {"key": "name"},
        "Split": {"key": "split"},
        "AP": {"align": ">"},
        "AP50": {"align": ">"},
        "AP75": {"align": ">"},
        "#": {"align": ">", "key": "n"}
    }
    rows = []
    for name, vals in report.per_category.items():
        rows.append({"name": name, "split": vals.get("split", ""), **{k: fmt_ap(vals[k]) for k in ("AP", "AP50", "AP75")}, "n": vals["n"]})
    for agg in ("base", "novel", "all"):
        vals = getattr(report, agg)
        rows.append({"name": f"**{agg}**", "split": "", **{k: fmt_ap(vals[k]) for k in ("AP", "AP50", "AP75")}, "n": vals["n"]})
    return make_table(headers, rows)


def ablation_table(rows: Sequence[Mapping[str, Any]]) -> str:
    """
    Novel-set AP per ablation variant and seed, plus the per-variant mean
    :param rows: dicts with variant, label, seed, AP, AP50, AP75
    """
    headers = {
        "Method": {"key": "label"},
        "Seed": {"align": ">", "key": "seed"},
        "AP": {"align": ">"},
        "AP50": {"align": ">"},
        "AP75": {"align": ">"}
    }
    fmt_rows = [{**r, **{k: fmt_ap(r[k]) for k in ("AP", "AP50", "AP75")}} for r in rows]
    order = list(dict.fromkeys(r["variant"] for r in rows))
    for variant in order:
        group = [r for r in rows if r["variant"] == variant]
        fmt_rows.append({"label": f"**{group[0]['label']}**", "seed": "mean", **{k: fmt_ap(v) for k, v in _mean_ap(group).items()}})
    return make_table(headers, fmt_rows)


def base_count_table(rows: Sequence[Mapping[str, Any]]) -> str:
    """
    Seed-averaged novel-set AP per number of mask-supervised base categories and method
    :param rows: dicts with base_categories, variant, label, seed, AP, AP50, AP75
    """
    headers = {
        "Base categories": {"align": ">", "key": "base_categories"},
        "Method": {"key": "label"},
        "Seeds": {"align": ">", "key": "seeds"},
        "AP": {"align": ">"},
        "AP50": {"align": ">"},
        "AP75": {"align": ">"}
    }
    groups = list(dict.fromkeys((r["base_categories"], r["variant"]) for r in rows))
    fmt_rows = []
    for count, variant in groups:
        group = [r for r in rows if r["base_categories"] == count and r["variant"] == variant]
        fmt_rows.append({
            "base_categories": count,
            "label": group[0]["label"],
            "seeds": len(group),
            **{k: fmt_ap(v) for k, v in _mean_ap(group).items()}
        })
    return make_table(headers, fmt_rows)


def _mean_ap(group: Sequence[Mapping[str, Any]]) -> Dict[str, Any]:
    mean = {}
    for k in ("AP", "AP50", "AP75"):
        vals = [r[k] for r in group if r[k] is not None]
        mean[k] = sum(vals) / len(vals) if vals else None
    return mean
