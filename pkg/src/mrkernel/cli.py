import json
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import typer
from rich.console import Console
from rich.table import Table

from . import gram as gram_io
from .base_kernels import eval_count, eval_count_reset
from .config import (
    DEFAULT_C,
    DEFAULT_THREADS,
    DEFAULT_TOL,
    RunConfig,
    format_kernel_spec,
    parse_epsilon,
    parse_kernel_spec,
)
from .exceptions import IoFailure, MultiresError, OracleMismatch
from .imaging import Dataset, ingest_manifest, load_dataset, save_dataset, synth_dataset
from .logger import MultiresLogger, get_logger
from .multires import MultiresSpec
from .oracle import ORACLE_TOLERANCE, run_oracle
from .svm import evaluate_splits, ova_train, save_model, training_error

app = typer.Typer(help="mrkernel: multiresolution kernels on nested histograms")
console = Console()


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging for debugging"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only log errors"),
    log_dir: Optional[Path] = typer.Option(None, "--log-dir", help="Also write a dated log file here"),
):
    """
    계층적으로 분해한 histogram 위의 multiresolution kernel 도구.
    """
    MultiresLogger.reset()
    get_logger(verbose=verbose, quiet=quiet, log_dir=log_dir)


@contextmanager
def _reported(command: str) -> Iterator[None]:
    """MultiresError를 한 줄 JSON(stderr)과 종료 코드 1로 변환"""
    logger = get_logger()
    try:
        yield
    except MultiresError as e:
        logger.debug(f"{command} failed: {e.message}")
        payload = {"command": command, **e.to_dict()}
        typer.echo(json.dumps(payload, sort_keys=True, ensure_ascii=False), err=True)
        raise typer.Exit(1)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e


def _spec_for(dataset: Dataset, kernel: str, epsilon: str) -> MultiresSpec:
    tree = dataset.tree
    value = parse_epsilon(epsilon, tree.branching or 1)
    return MultiresSpec(tree.with_epsilon(value), parse_kernel_spec(kernel))


@app.command()
def synth(
    per_class: int = typer.Option(..., "--per-class", min=1, help="Images per class"),
    splits: int = typer.Option(2, "--splits", min=2, help="Grid splits per axis (s)"),
    depth: int = typer.Option(1, "--depth", min=0, help="Hierarchy depth (D)"),
    seed: int = typer.Option(0, "--seed", help="Random seed"),
    noise: float = typer.Option(0.05, "--noise", help="Fraction of noise pixels"),
    out: Path = typer.Option(..., "--out", help="Output MRKD1 file"),
):
    """
    전역 histogram은 같고 공간 배치만 다른 2-클래스 합성 데이터셋을 만듭니다.
    """
    with _reported("synth"):
        run = RunConfig("synth", {
            "per_class": per_class, "splits": splits, "depth": depth, "seed": seed, "noise": noise,
        })
        dataset = synth_dataset(2, per_class, splits, seed, depth=depth, noise_rate=noise)
        save_dataset(out, dataset, run.to_dict())
        console.print(f"[green]✓ {len(dataset.records)} records -> {out}[/green]")


@app.command()
def ingest(
    manifest: Path = typer.Option(..., "--manifest", help="Lines of `<ppm path>,<label>`"),
    splits: int = typer.Option(..., "--splits", min=2, help="Grid splits per axis (s)"),
    depth: int = typer.Option(..., "--depth", min=0, help="Hierarchy depth (D)"),
    out: Path = typer.Option(..., "--out", help="Output MRKD1 file"),
    threads: int = typer.Option(DEFAULT_THREADS, "--threads", min=1, help="Decode threads"),
):
    """
    manifest의 P6 PPM 이미지를 9-bit 색 히스토그램 계층으로 변환합니다.
    """
    with _reported("ingest"):
        run = RunConfig("ingest", {"manifest": str(manifest), "splits": splits, "depth": depth})
        dataset = ingest_manifest(manifest, splits, depth, threads=threads)
        save_dataset(out, dataset, run.to_dict())
        console.print(
            f"[green]✓ {len(dataset.records)} records, {dataset.tree.leaf_count} leaves -> {out}[/green]"
        )


@app.command()
def gram(
    data: Path = typer.Option(..., "--data", help="MRKD1 dataset"),
    kernel: str = typer.Option("rbf:a=1,b=1,rho=0.01", "--kernel", help="`rbf:a=..,b=..,rho=..` or `jd`"),
    epsilon: str = typer.Option("1/alpha", "--epsilon", help="Real in [0,1] or `1/alpha`"),
    out: Path = typer.Option(..., "--out", help="Output MRKG1 file"),
    csv: bool = typer.Option(False, "--csv", help="Also write `<out>.csv`"),
    dense: bool = typer.Option(False, "--dense", help="CSV as a full matrix"),
    threads: int = typer.Option(DEFAULT_THREADS, "--threads", min=1, help="Worker threads"),
):
    """
    데이터셋 전체의 k_π Gram 행렬을 계산합니다.
    """
    logger = get_logger()
    with _reported("gram"):
        dataset = load_dataset(data)
        spec = _spec_for(dataset, kernel, epsilon)
        value = parse_epsilon(epsilon, dataset.tree.branching or 1)
        # 스레드 수는 출력에 넣지 않음
        run = RunConfig("gram", {
            "data": str(data), "kernel": format_kernel_spec(spec.base),
            "epsilon": epsilon, "epsilon_value": value,
        })
        logger.debug(f"gram: {run.to_json()} threads={threads}")
        eval_count_reset()
        with logger.stage("compute_gram"):
            g = gram_io.compute_gram(
                dataset.records, spec, threads=threads, show_progress=True,
                provenance={"run": run.to_dict(), "dataset": dataset.tree_config()},
            )
        logger.debug(f"gram: {eval_count()} base kernel evaluations")
        gram_io.save(g, out)
        console.print(f"[green]✓ {g.n}×{g.n} Gram (ε={value:g}) -> {out}[/green]")
        if csv:
            csv_path = out.with_name(out.name + ".csv")
            gram_io.export_csv(g, csv_path, dense=dense)
            console.print(f"[green]✓ CSV -> {csv_path}[/green]")


@app.command("check-oracle")
def check_oracle(
    alpha: int = typer.Option(2, "--alpha", min=2, help="Branching factor"),
    depth: int = typer.Option(1, "--depth", min=0, help="Tree depth"),
    trials: int = typer.Option(100, "--trials", min=1, help="Random trials"),
    seed: int = typer.Option(0, "--seed", help="Random seed"),
):
    """
    factorized 계산을 전수 열거 결과와 대조합니다.
    """
    with _reported("check-oracle"):
        result = run_oracle(alpha, depth, trials, seed)
        console.print(f"max diff: {result.max_diff!r} over {result.trials} trials (tol {ORACLE_TOLERANCE:g})")
        if not result.passed:
            console.print("[red]FAIL[/red]")
            raise OracleMismatch(result.max_diff, ORACLE_TOLERANCE, result.trials)
        console.print("[green]PASS[/green]")


@app.command()
def train(
    gram_path: Path = typer.Option(..., "--gram", help="MRKG1 Gram file"),
    C: float = typer.Option(DEFAULT_C, "--C", help="SVM box constraint"),
    tol: float = typer.Option(DEFAULT_TOL, "--tol", help="KKT tolerance"),
    out: Path = typer.Option(..., "--out", help="Output model file"),
    threads: int = typer.Option(DEFAULT_THREADS, "--threads", min=1, help="Parallel classes"),
):
    """
    Gram 전체로 one-vs-all SVM을 학습하고 모델 파일을 씁니다.
    """
    with _reported("train"):
        g = gram_io.load(gram_path)
        run = RunConfig("train", {"gram": str(gram_path), "C": C, "tol": tol})
        model = ova_train(g.values, g.labels, C, tol, threads)
        save_model(model, out, run.to_dict())
        error = training_error(model, g.values, g.labels)
    console.print(f"classes: {list(model.class_ids)}")
    console.print(f"training error: {error:.4f}")
    console.print(f"[green]✓ model -> {out}[/green]")


@app.command("eval")
def eval_(
    gram_path: Path = typer.Option(..., "--gram", help="MRKG1 Gram file"),
    C: float = typer.Option(DEFAULT_C, "--C", help="SVM box constraint"),
    splits: int = typer.Option(4, "--splits", min=1, help="Random train/test splits"),
    train_frac: float = typer.Option(0.75, "--train-frac", help="Training share per class"),
    seed: int = typer.Option(0, "--seed", help="Split seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the CSV here instead of stdout"),
    threads: int = typer.Option(DEFAULT_THREADS, "--threads", min=1, help="Parallel classes"),
):
    """
    무작위 균형 분할마다 오류율을 CSV로 보고합니다.
    """
    with _reported("eval"):
        g = gram_io.load(gram_path)
        run = RunConfig("eval", {
            "gram": str(gram_path), "C": C, "splits": splits, "train_frac": train_frac, "seed": seed,
        })
        report = evaluate_splits(g, C, splits, train_frac, seed, threads=threads)
        text = report.to_csv(run.to_dict())
        if out is None:
            typer.echo(text, nl=False)
        else:
            _write_text(out, text)
            console.print(f"mean error: {report.mean:.4f}")
            console.print(f"[green]✓ CSV -> {out}[/green]")


@app.command()
def psd(
    gram_path: Path = typer.Option(..., "--gram", help="MRKG1 Gram file"),
):
    """
    Gram 행렬의 최소 고유값을 출력합니다.
    """
    with _reported("psd"):
        g = gram_io.load(gram_path)
        typer.echo(repr(gram_io.min_eigenvalue(g)))


SWEEP_KERNELS = ("rbf:a=0.25,b=1,rho=0.01", "rbf:a=0.5,b=1,rho=0.01", "rbf:a=1,b=1,rho=0.01", "jd")
SWEEP_GRIDS = ((2, 1), (2, 2), (3, 1), (3, 2))


def _sweep_rows(per_class: int, seed: int, C: float, n_splits: int, threads: int) -> List[Dict[str, object]]:
    logger = get_logger()
    datasets = {(s, d): synth_dataset(2, per_class, s, seed, depth=d) for s, d in SWEEP_GRIDS}
    rows = []
    for kernel in SWEEP_KERNELS:
        configs = [("global", SWEEP_GRIDS[0], "0")]
        for grid in SWEEP_GRIDS:
            configs.append(("multires", grid, "1/alpha"))
            configs.append(("finest", grid, "1"))
        for name, (s, d), epsilon in configs:
            dataset = datasets[(s, d)]
            spec = _spec_for(dataset, kernel, epsilon)
            g = gram_io.compute_gram(dataset.records, spec, threads=threads)
            report = evaluate_splits(g, C, n_splits, 0.75, seed, threads=threads)
            alpha = s * s if name != "global" else 1
            depth = d if name != "global" else 0
            logger.debug(f"sweep {kernel} {name} alpha={alpha} depth={depth}: {report.mean:.4f}")
            rows.append({
                "kernel": kernel, "mode": name, "alpha": alpha, "depth": depth,
                "epsilon": epsilon, "mean_error": report.mean,
            })
    return rows


@app.command()
def sweep(
    per_class: int = typer.Option(30, "--per-class", min=2, help="Synthetic images per class"),
    seed: int = typer.Option(0, "--seed", help="Dataset and split seed"),
    C: float = typer.Option(DEFAULT_C, "--C", help="SVM box constraint"),
    splits: int = typer.Option(4, "--splits", min=1, help="Random train/test splits"),
    out: Optional[Path] = typer.Option(None, "--out", help="Also write the table as CSV"),
    threads: int = typer.Option(DEFAULT_THREADS, "--threads", min=1, help="Worker threads"),
):
    """
    합성 데이터셋에서 전역 / multiresolution / 최세밀 kernel의 오류율을 비교합니다.
    """
    with _reported("sweep"):
        rows = _sweep_rows(per_class, seed, C, splits, threads)
        table = Table(title="mean error rate")
        for column in ("kernel", "mode", "alpha", "depth", "epsilon", "mean_error"):
            table.add_column(column)
        for row in rows:
            table.add_row(*[
                f"{row[c]:.4f}" if c == "mean_error" else str(row[c])
                for c in ("kernel", "mode", "alpha", "depth", "epsilon", "mean_error")
            ])
        console.print(table)

        if out is not None:
            run = RunConfig("sweep", {"per_class": per_class, "seed": seed, "C": C, "splits": splits})
            lines = ["# " + run.to_json(), "kernel,mode,alpha,depth,epsilon,mean_error"]
            lines.extend(
                f"{r['kernel'].replace(',', ';')},{r['mode']},{r['alpha']},{r['depth']},{r['epsilon']},{r['mean_error']!r}"
                for r in rows
            )
            _write_text(out, "\n".join(lines) + "\n")
            console.print(f"[green]✓ CSV -> {out}[/green]")


if __name__ == "__main__":
    app()
