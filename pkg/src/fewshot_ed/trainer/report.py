"""Result tables: model comparison across settings and the loss ablation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..classifier import FAMILY_TITLES
from .search import LOSS_TITLES, LOSS_VARIANTS, CellResult, setting_title

FAMILY_ORDER = ("proto", "proto_att", "relation", "matching")
ENCODER_ORDER = ("cnn", "lstm", "gcn")
ENCODER_TITLES = {"cnn": "CNN", "lstm": "LSTM", "gcn": "GCN"}


@dataclass
class Table:
    title: str
    header: list[list[str]]   # one or two header rows
    rows: list[list[str]]

    @property
    def columns(self) -> list[str]:
        """Flattened column names, e.g. '5+1-way 5-shot | CNN'."""
        if len(self.header) == 1:
            return list(self.header[0])
        names, group = [], ""
        for top, bottom in zip(*self.header):
            group = top or group
            names.append(f"{group} | {bottom}" if bottom and group != bottom else (bottom or group))
        return names

    def to_csv(self) -> str:
        """Header rows as laid out (spanning labels on the first cell of their span), then data rows."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerows(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_text(self) -> str:
        lines = self.header + self.rows
        widths = [max(len(r[i]) for r in lines) for i in range(len(lines[0]))]
        fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths))
        rule = "-+-".join("-" * w for w in widths)
        out = [self.title, rule] + [fmt(h) for h in self.header] + [rule] + [fmt(r) for r in self.rows] + [rule]
        return "\n".join(out)


def _pct(x: float | None) -> str:
    return "" if x is None else f"{100 * x:.2f}"


def _ordered(values, order):
    return [v for v in order if v in values] + sorted(set(values) - set(order))


def _index(results: list[CellResult], metric: str):
    return {(r.key.family, r.key.encoder, r.key.setting, r.key.loss): getattr(r, metric) for r in results}


def _settings(results):
    return sorted({r.key.setting for r in results})


def comparison_table(results: list[CellResult], metric: str = "test_f1") -> Table:
    """Families as rows; (setting, encoder) columns; original losses only."""
    idx = _index(results, metric)
    fams = _ordered({r.key.family for r in results}, FAMILY_ORDER)
    encs = _ordered({r.key.encoder for r in results}, ENCODER_ORDER)
    settings = _settings(results)
    top, bottom = ["Model"], ["Encoder"]
    for s in settings:
        for i, e in enumerate(encs):
            top.append(setting_title(*s) if i == 0 else "")
            bottom.append(ENCODER_TITLES.get(e, e))
    rows = [[FAMILY_TITLES.get(f, f)] + [_pct(idx.get((f, e, s, "original"))) for s in settings for e in encs]
            for f in fams]
    return Table(f"F1 (micro, {metric.split('_')[0]}) without auxiliary losses", [top, bottom], rows)


def _encoder_family_rows(results, families):
    fams = _ordered({r.key.family for r in results} & set(families), FAMILY_ORDER)
    encs = _ordered({r.key.encoder for r in results}, ENCODER_ORDER)
    return [(f, e) for f in fams for e in encs]


def aux_loss_table(results: list[CellResult], metric: str = "test_f1") -> Table:
    """(encoder, model) rows; per setting: Original and +Inter+Intra."""
    idx = _index(results, metric)
    settings = _settings(results)
    top, bottom = ["Encoder", "Model"], ["", ""]
    for s in settings:
        top += [setting_title(*s), ""]
        bottom += ["Original", "+Inter+Intra"]
    rows = []
    for f, e in _encoder_family_rows(results, ("proto", "proto_att")):
        row = [ENCODER_TITLES.get(e, e), FAMILY_TITLES.get(f, f)]
        for s in settings:
            row += [_pct(idx.get((f, e, s, "original"))), _pct(idx.get((f, e, s, "both")))]
        rows.append(row)
    return Table(f"F1 (micro, {metric.split('_')[0]}) with and without auxiliary losses", [top, bottom], rows)


def ablation_table(results: list[CellResult], metric: str = "dev_f1", setting=None) -> Table:
    """(encoder, model) rows; Original | +Inter | +Intra | +Intra+Inter columns."""
    idx = _index(results, metric)
    setting = setting or _settings(results)[0]
    header = [["Encoder", "FSL Model"] + [LOSS_TITLES[v] for v in LOSS_VARIANTS]]
    rows = []
    for f, e in _encoder_family_rows(results, ("proto", "proto_att")):
        rows.append([ENCODER_TITLES.get(e, e), FAMILY_TITLES.get(f, f)]
                    + [_pct(idx.get((f, e, setting, v))) for v in LOSS_VARIANTS])
    return Table(f"Ablation: F1 (micro, {metric.split('_')[0]}), {setting_title(*setting)}", header, rows)


def matrix_table(results: list[CellResult], metric: str = "dev_f1") -> Table:
    """Every family: (encoder, model) rows, (setting, loss variant) columns."""
    idx = _index(results, metric)
    settings = _settings(results)
    losses = _ordered({r.key.loss for r in results}, LOSS_VARIANTS)
    top, bottom = ["Encoder", "Model"], ["", ""]
    for s in settings:
        for i, l in enumerate(losses):
            top.append(setting_title(*s) if i == 0 else "")
            bottom.append(LOSS_TITLES[l])
    rows = []
    for f, e in _encoder_family_rows(results, FAMILY_ORDER + tuple({r.key.family for r in results})):
        rows.append([ENCODER_TITLES.get(e, e), FAMILY_TITLES.get(f, f)]
                    + [_pct(idx.get((f, e, s, l))) for s in settings for l in losses])
    header = [top, bottom] if len(settings) > 1 else [["Encoder", "Model"] + [LOSS_TITLES[l] for l in losses]]
    return Table(f"F1 (micro, {metric.split('_')[0]})", header, rows)


def standard_tables(results: list[CellResult]) -> dict[str, Table]:
    """Whichever of the three table layouts the finished cells can fill."""
    losses = {r.key.loss for r in results}
    fams = {r.key.family for r in results}
    tables = {}
    if "original" in losses:
        tables["table1"] = comparison_table(results)
    if {"original", "both"} <= losses and fams & {"proto", "proto_att"}:
        tables["table2"] = aux_loss_table(results)
    if set(LOSS_VARIANTS) <= losses and fams & {"proto", "proto_att"}:
        tables["table3"] = ablation_table(results)
    return tables
