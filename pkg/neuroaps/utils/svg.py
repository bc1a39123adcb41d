import os

import jinja2

from neuroaps.api.cloud import denormalize_coordinates, region_counts
from neuroaps.api.dataclasses import RegionLabel
from neuroaps.utils.utils import atomic_write

REGION_COLORS = {
    RegionLabel.HIPPOCAMPUS: "#e6194b",
    RegionLabel.VENTRICLES: "#4363d8",
    RegionLabel.SURFACE: "#f5d742",
    RegionLabel.INTERIOR: "#9a9a9a",
}

_env = None


def environment():
    global _env
    if _env is None:
        templateLoader = jinja2.FileSystemLoader(searchpath=os.path.join(os.path.dirname(os.path.dirname(__file__)),
                                                                         "templates"))
        _env = jinja2.Environment(loader=templateLoader, autoescape=True)
    return _env


def render_cloud_svg(cloud, size=512, radius=1.2, title=None):
    """Dispersão dos pontos da nuvem, coloridos por região."""
    cx, cy = denormalize_coordinates(cloud.x, cloud.y, size, size)
    points = [dict(cx=float(x) + 0.5, cy=float(y) + 0.5, color=REGION_COLORS[RegionLabel(int(r))])
              for x, y, r in zip(cx, cy, cloud.region)]
    counts = region_counts(cloud)
    legend = [dict(name=str(region), color=REGION_COLORS[region], count=counts[int(region)]) for region in RegionLabel]
    return environment().get_template("cloud_scatter.svg.j2").render(
        size=size, radius=radius, points=points, legend=legend, title=title or str(cloud))


def render_sweep_svg(summary, value="accuracy_mean", error="accuracy_std", title="sweep", y_label="accuracy",
                     width=640, height=360, margin=48):
    """
    Gráfico de barras de um resumo de varredura (RunReport.summary()).

    Uma barra por (variante, pontos), com barra de erro de um desvio padrão.
    """
    rows = summary.to_dict(orient="records")
    top = max([float(r[value]) + float(r.get(error, 0.0) or 0.0) for r in rows] + [1e-12])
    plot_h = height - margin - 30
    slot = (width - margin - 10) / max(len(rows), 1)
    bar_width = slot * 0.7
    palette = ["#4363d8", "#3cb44b", "#f58231", "#911eb4", "#e6194b"]
    variants = list(dict.fromkeys(str(r["variant"]) for r in rows))
    bars = []
    for i, r in enumerate(rows):
        h = float(r[value]) / top * plot_h
        bars.append(dict(x=margin + i * slot + (slot - bar_width) / 2, y=height - margin - h, h=h,
                         err=float(r.get(error, 0.0) or 0.0) / top * plot_h,
                         color=palette[variants.index(str(r["variant"])) % len(palette)],
                         label="{}/{}".format(r["variant"], r["n_points"]), value="{:.3g}".format(float(r[value]))))
    ticks = [dict(y=height - margin - f * plot_h, label="{:.3g}".format(f * top)) for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
    return environment().get_template("sweep_chart.svg.j2").render(
        width=width, height=height, margin=margin, bars=bars, bar_width=bar_width, ticks=ticks, title=title,
        y_label=y_label)


def write_svg(path, text):
    with atomic_write(path) as f:
        f.write(text)
