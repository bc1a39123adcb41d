import logging
import os

import click
from colorama import Fore, Style
from tabulate import tabulate

from neuroaps.api.dataclasses import ALLOWED_SIZES, RegionLabel, SamplerKind
from neuroaps.api.exceptions import NeuroApsException, UsageException
from neuroaps.configFolder import ConfigFolder
from neuroaps.controller.model_controller import count_parameters, flop_count

"""
================================================================================
CLASSE: NeuroApsCli
================================================================================
Interface de linha de comando (CLI) do NeuroAPS.

Esta classe fornece os comandos do pipeline:
- setup: cria a pasta de trabalho e o config.yaml
- gen-phantom: gera fantomas e manifesto
- sample: gera nuvens APC1 com APS ou um amostrador de ablação
- train / eval: treina e avalia o NeuroAPS-Net
- bench: latência e workspace de um checkpoint
- sweep: varreduras de densidade e de ablação
"""
class NeuroApsCli():
    def __init__(self, config) -> None:
        """
        Args:
            config: Objeto ConfigFolder para gerenciar configurações
        """
        self.config = config
        self._app = None

    @property
    def app(self):
        if self._app is None:
            from neuroaps.neuroaps import NeuroAps
            self._app = NeuroAps(self.config)
        return self._app

    def default_path(self, *parts):
        return self.config.get_file_path(os.path.join(*parts))

    def setup(self):
        print("Setting up NeuroAPS in {}".format(os.path.abspath(self.config.path)))
        self.config.create_folders()
        self.config.create_config_file()

    def gen_phantom(self, count_per_class, size, seed, out_dir):
        manifest = self.app.phantom.generate(count_per_class, size, seed, out_dir)
        print("Phantom manifest {}{}{}".format(Fore.LIGHTGREEN_EX, manifest, Style.RESET_ALL))
        return manifest

    def sample(self, manifest, sampler, points, ratios, seed, out_dir, svg):
        cloud_manifest = self.app.sampler.sample(manifest, sampler, points, seed, ratios, out_dir, svg)
        print("Cloud manifest {}{}{}".format(Fore.LIGHTGREEN_EX, cloud_manifest, Style.RESET_ALL))
        return cloud_manifest

    def train(self, clouds, checkpoint_out, history_out, **overrides):
        checkpoint_out = checkpoint_out or self.default_path("checkpoints", "model.naps")
        history_out = history_out or self.default_path("reports", "history.csv")
        params, history = self.app.trainer.fit(clouds, checkpoint_out, history_out, init_seed=overrides.get("seed"),
                                               **overrides)
        print(tabulate([h.to_dict() for h in history], headers="keys", floatfmt=".4f"))
        print("Checkpoint {}{}{} ({} parameters)".format(Fore.LIGHTGREEN_EX, checkpoint_out, Style.RESET_ALL,
                                                        count_parameters(params)))

    def evaluate(self, checkpoint, clouds, split, workers, attention):
        params = self.app.model.load(checkpoint)
        output = self.app.trainer.evaluate(params, clouds, split, workers, return_attention=attention)
        result, weights = output if attention else (output, None)
        print("accuracy={:.4f} tp={} tn={} fp={} fn={} n={}".format(result.accuracy, result.tp, result.tn,
                                                                   result.fp, result.fn, result.total))
        if weights is not None:
            print(Fore.LIGHTYELLOW_EX, "Mean ROI attention", Style.RESET_ALL)
            print(tabulate([[str(region), w] for region, w in zip(RegionLabel, weights)],
                           headers=["region", "weight"], floatfmt=".4f"))
        return result

    def bench(self, checkpoint, points, warmup, reps):
        params = self.app.model.load(checkpoint)
        row = self.app.bench.bench_checkpoint(params, points, warmup, reps)
        row["parameters"] = count_parameters(params)
        row["flops"] = flop_count(params.config, points)["total"]
        print(tabulate([row], headers="keys", floatfmt=".3f"))
        return row

    def sweep(self, mode, manifest, seeds, points, report_out, json_out, svg, workers, warmup, reps):
        from neuroaps.utils.report import write_report

        manifest = manifest or self.default_path("phantoms", "manifest.yaml")
        kwargs = dict(workers=workers, warmup=warmup, reps=reps)
        if mode == "density":
            report = self.app.bench.density_sweep(manifest, points, seeds, **kwargs)
        else:
            report = self.app.bench.ablation_sweep(manifest, seeds, points[0] if points else None, **kwargs)
        report_out = report_out or self.default_path("reports", "{}.csv".format(mode))
        json_path = os.path.splitext(report_out)[0] + ".json" if json_out else None
        write_report(report, report_out, json_path)
        print(Fore.LIGHTYELLOW_EX, "{} sweep".format(mode.capitalize()), Style.RESET_ALL)
        print(tabulate(report.to_frame(), headers="keys", showindex=False, floatfmt=".4f"))
        print("")
        print(tabulate(report.summary(), headers="keys", showindex=False, floatfmt=".4f"))
        if svg:
            from neuroaps.utils.svg import render_sweep_svg, write_svg
            write_svg(os.path.splitext(report_out)[0] + ".svg",
                      render_sweep_svg(report.summary(), title="{} sweep".format(mode)))
        print("Report {}{}{}".format(Fore.LIGHTGREEN_EX, report_out, Style.RESET_ALL))
        return report


def error_line(e: NeuroApsException):
    message = str(e).replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")
    return 'error code={} exit={} message="{}"'.format(e.code, e.exit_code, message)


class NeuroApsGroup(click.Group):
    """Converte NeuroApsException em uma linha de erro e no código de saída correspondente."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except NeuroApsException as e:
            click.echo(error_line(e), err=True)
            ctx.exit(e.exit_code)


def parse_ratios(ctx, param, value):
    if value is None:
        return None
    try:
        ratios = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected four comma-separated fractions, got {}".format(value))
    if len(ratios) != len(RegionLabel) or any(r < 0 for r in ratios):
        raise click.BadParameter("expected four non-negative fractions in order {}".format(
            ",".join(str(r) for r in RegionLabel)))
    if abs(sum(ratios) - 1.0) > 1e-6:
        raise click.BadParameter("ratios must sum to 1 within 1e-6, got {}".format(sum(ratios)))
    total = sum(ratios)
    return tuple(r / total for r in ratios)


def parse_seeds(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers, got {}".format(value))


def cloud_manifest_path(ctx, param, value):
    if value is not None and os.path.isdir(value):
        return os.path.join(value, "manifest.yaml")
    return value


POINT_CHOICES = click.Choice([str(n) for n in ALLOWED_SIZES])
SAMPLER_CHOICES = click.Choice([str(k) for k in SamplerKind])


@click.group(cls=NeuroApsGroup)
@click.pass_context
@click.option('--config-folder-path', '-c', default="./config", type=click.Path(),
              help="Specify where the config folder is located. Defaults to './config'.")
@click.option('--debug', is_flag=True, help="Log at DEBUG level.")
def main(context, config_folder_path, debug):
    """
    Interface de linha de comando principal do NeuroAPS.
    Gera fantomas, amostra nuvens, treina, avalia e mede o NeuroAPS-Net.
    """
    level = logging.DEBUG if debug else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(name)s - %(message)s')
    logging.getLogger().setLevel(level)
    context.obj = NeuroApsCli(ConfigFolder(config_folder_path))


@main.command()
@click.pass_context
def setup(context):
    """Create the config folder structure and the default config.yaml."""
    context.obj.setup()


@main.command('gen-phantom')
@click.pass_context
@click.option('--count-per-class', type=click.IntRange(min=5), default=None,
              help="Phantoms per class.  [default: phantom.count_per_class = 100]")
@click.option('--size', type=click.IntRange(min=1), default=None,
              help="Image size in pixels.  [default: phantom.image_size = 128]")
@click.option('--seed', type=int, default=None, help="Dataset seed.  [default: phantom.seed = 0]")
@click.option('--out-dir', type=click.Path(file_okay=False), default=None,
              help="Output folder.  [default: <config>/phantoms]")
def gen_phantom(context, count_per_class, size, seed, out_dir):
    """Write phantom slices, masks and the dataset manifest."""
    context.obj.gen_phantom(count_per_class, size, seed, out_dir)


@main.command()
@click.pass_context
@click.option('--manifest', type=click.Path(exists=True, dir_okay=False), required=True,
              help="Phantom manifest written by gen-phantom.")
@click.option('--sampler', type=SAMPLER_CHOICES, default="aps", show_default=True, help="Sampling strategy.")
@click.option('--points', type=POINT_CHOICES, default="2048", show_default=True, help="Points per cloud.")
@click.option('--ratios', callback=parse_ratios, default=None,
              help="APS ratios hippocampus,ventricles,surface,interior.  [default: 0.25,0.25,0.30,0.20]")
@click.option('--seed', type=int, default=None, help="Sampling seed.  [default: sampling.seed = 0]")
@click.option('--out-dir', type=click.Path(file_okay=False), default=None,
              help="Output folder.  [default: <config>/clouds/<sampler>/<points>]")
@click.option('--svg', is_flag=True, help="Also write a color-by-region scatter per cloud.")
def sample(context, manifest, sampler, points, ratios, seed, out_dir, svg):
    """Sample APC1 point clouds for every phantom of a manifest."""
    if ratios is not None and sampler != str(SamplerKind.APS):
        raise UsageException("--ratios only applies to --sampler aps, not {}".format(sampler))
    context.obj.sample(manifest, sampler, int(points), ratios, seed, out_dir, svg)


@main.command()
@click.pass_context
@click.option('--clouds', type=click.Path(exists=True), callback=cloud_manifest_path, required=True,
              help="Cloud folder (or its manifest.yaml) written by sample.")
@click.option('--epochs', type=click.IntRange(min=0), default=None, help="Epochs.  [default: train.epochs = 30]")
@click.option('--lr', type=click.FloatRange(min=0), default=None,
              help="Adam learning rate.  [default: train.learning_rate = 0.001]")
@click.option('--batch', type=click.IntRange(min=1), default=None, help="Batch size.  [default: train.batch_size = 16]")
@click.option('--jitter', type=click.FloatRange(min=0), default=None,
              help="Coordinate jitter sigma.  [default: train.jitter_sigma = 0.01]")
@click.option('--dropout', type=click.FloatRange(min=0, max=1, max_open=True), default=None,
              help="Point dropout fraction.  [default: train.dropout_fraction = 0.1]")
@click.option('--seed', type=int, default=None, help="Training and init seed.  [default: train.seed = 0]")
@click.option('--checkpoint-out', type=click.Path(dir_okay=False), default=None,
              help="Checkpoint file.  [default: <config>/checkpoints/model.naps]")
@click.option('--history-out', type=click.Path(dir_okay=False), default=None,
              help="History CSV.  [default: <config>/reports/history.csv]")
def train(context, clouds, epochs, lr, batch, jitter, dropout, seed, checkpoint_out, history_out):
    """Train NeuroAPS-Net on a cloud folder."""
    context.obj.train(clouds, checkpoint_out, history_out, epochs=epochs, learning_rate=lr, batch_size=batch,
                      jitter_sigma=jitter, dropout_fraction=dropout, seed=seed)


@main.command('eval')
@click.pass_context
@click.option('--checkpoint', type=click.Path(exists=True, dir_okay=False), required=True, help="NAPS checkpoint.")
@click.option('--clouds', type=click.Path(exists=True), callback=cloud_manifest_path, required=True,
              help="Cloud folder (or its manifest.yaml).")
@click.option('--split', type=click.Choice(["train", "test"]), default="test", show_default=True)
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True,
              help="Evaluation threads.")
@click.option('--attention', is_flag=True, help="Print mean ROI attention weights.")
def evaluate(context, checkpoint, clouds, split, workers, attention):
    """Print accuracy and confusion counts (AD is positive)."""
    context.obj.evaluate(checkpoint, clouds, split, workers, attention)


@main.command()
@click.pass_context
@click.option('--checkpoint', type=click.Path(exists=True, dir_okay=False), required=True, help="NAPS checkpoint.")
@click.option('--points', type=POINT_CHOICES, default="2048", show_default=True, help="Points per cloud.")
@click.option('--warmup', type=click.IntRange(min=3), default=5, show_default=True, help="Untimed forwards.")
@click.option('--reps', type=click.IntRange(min=20), default=50, show_default=True, help="Timed forwards.")
def bench(context, checkpoint, points, warmup, reps):
    """Print median latency and peak workspace of a checkpoint."""
    context.obj.bench(checkpoint, int(points), warmup, reps)


@main.command()
@click.pass_context
@click.option('--mode', type=click.Choice(["density", "ablation"]), default="density", show_default=True)
@click.option('--manifest', type=click.Path(exists=True, dir_okay=False), default=None,
              help="Phantom manifest.  [default: <config>/phantoms/manifest.yaml]")
@click.option('--seeds', callback=parse_seeds, default=None, help="Comma-separated seeds.  [default: 0,1,2]")
@click.option('--points', type=POINT_CHOICES, multiple=True,
              help="Point counts (density) or the single count (ablation).  [default: 2048,4096,8192 / 8192]")
@click.option('--report-out', type=click.Path(dir_okay=False), default=None,
              help="Report CSV.  [default: <config>/reports/<mode>.csv]")
@click.option('--json', 'json_out', is_flag=True, help="Also write a JSON mirror of the report.")
@click.option('--svg', is_flag=True, help="Also write an SVG bar chart of the summary.")
@click.option('--workers', type=click.IntRange(min=1), default=None,
              help="Parallel training processes.  [default: bench.workers = 1]")
@click.option('--warmup', type=click.IntRange(min=3), default=None, help="Untimed forwards.  [default: 5]")
@click.option('--reps', type=click.IntRange(min=20), default=None, help="Timed forwards.  [default: 50]")
def sweep(context, mode, manifest, seeds, points, report_out, json_out, svg, workers, warmup, reps):
    """Run the point-density or the sampler-ablation sweep."""
    if mode == "ablation" and len(points) > 1:
        raise UsageException("ablation runs at a single point count, got {}".format(",".join(points)))
    context.obj.sweep(mode, manifest, seeds, [int(p) for p in points] or None, report_out, json_out, svg, workers,
                      warmup, reps)
