from pathlib import Path
from typing import Optional

import typer

from .core import (
    COMMANDS,
    Config,
    ConfigError,
    Messages,
    QuantizerError,
    RunReport,
    SuiteRunner,
    Verdict,
    merge_parts,
    read_part,
    require,
    write_part,
    write_report,
)

app = typer.Typer(help="Reflection-positive quantization of the lattice Gaussian field", no_args_is_help=True)

SEPARATOR = "=" * 60

ConfigOption = typer.Option(Path("rpq.yaml"), "--config", "-c", help="Config file")
OutDirOption = typer.Option(None, "--out-dir", "-o", help="Output directory (overrides RPQ_OUT_DIR)")
SeedOption = typer.Option(None, "--seed", help="Override the config seed")


def _load(config_file: Path, seed: Optional[int]) -> Config:
    config = Config.load(config_file)
    if seed is not None:
        config.seed = seed
    return config


def _summary(m: Messages, report: RunReport):
    print()
    print(SEPARATOR)
    print(f"  {m.t('cli.result_all_pass') if not report.failed else m.t('cli.result_failures')}")
    print(SEPARATOR)
    print(m.t("cli.summary", passed=report.count(Verdict.PASS), findings=report.count(Verdict.FINDING), failed=report.count(Verdict.FAIL)))
    if report.failed:
        print(m.t("cli.failed_checks", checks=", ".join(report.failed)))


def _finish(report: RunReport):
    if report.failed:
        raise typer.Exit(1)


def _run_command(command: str, config_file: Path, out_dir: Optional[Path], seed: Optional[int]):
    """Runs one subcommand's checks, writes its partial output and returns the config and report."""
    try:
        config = _load(config_file, seed)
        m = config.messages
        target = config.out_dir(out_dir)
        prior = {}
        if command == "analyticity":
            prior = read_part("spectrum", target) or {}
            require(prior, ["FE1"], m)
        runner = SuiteRunner(config, prior=prior)
        report = runner.run(COMMANDS[command])
        path = write_part(command, report, config.echo(), target)
        print(m.t("cli.written", path=path))
        return config, report
    except (ConfigError, QuantizerError) as e:
        print(str(e))
        raise typer.Exit(1)


@app.command()
def init(
    output: Path = typer.Option(Path("rpq.yaml"), "--output", "-o", help="Config file to create"),
    language: Optional[str] = typer.Option(None, "--language", help="en-US or zh-CN"),
):
    """Write the desk configuration"""
    m = Messages(language or "en-US")
    try:
        config_file = Config.create(output_file=output, language=language)
        print(m.t("init.created", path=config_file))
        print(m.t("init.next_steps"))
        print(m.t("init.next_edit", config=config_file))
        print(m.t("init.next_run", config=config_file))
    except Exception as e:
        print(m.t("init.failed", error=str(e)))
        raise typer.Exit(1)


@app.command()
def run(
    config_file: Path = ConfigOption,
    out_dir: Optional[Path] = OutDirOption,
    only: Optional[list[str]] = typer.Option(None, "--only", help="Run only these checks"),
    seed: Optional[int] = SeedOption,
):
    """Run every check and write report.json with the CSV tables"""
    try:
        config = _load(config_file, seed)
        m = config.messages
        keys = None
        if only:
            keys = [k.strip() for item in only for k in item.split(",") if k.strip()]
        runner = SuiteRunner(config)
        report = runner.run(keys)
        path = write_report(report, config.echo(), config.out_dir(out_dir))
    except (ConfigError, QuantizerError) as e:
        print(str(e))
        raise typer.Exit(1)

    _summary(m, report)
    print(m.t("cli.written", path=path))
    _finish(report)


@app.command("check-rp")
def check_rp(config_file: Path = ConfigOption, out_dir: Optional[Path] = OutDirOption, seed: Optional[int] = SeedOption):
    """Invariance, reflection positivity, growth bound, isometry and Wick checks"""
    config, report = _run_command("check-rp", config_file, out_dir, seed)
    m = config.messages
    c2 = report.results["C2"]
    if c2.evidence:
        print(m.t("cli.rp_result", lmin=c2.evidence["min_eigenvalue"], lmax=c2.evidence["max_eigenvalue"], rank=c2.evidence["cholesky_rank"], verdict=c2.verdict.value))
    _summary(m, report)
    _finish(report)


@app.command()
def spectrum(config_file: Path = ConfigOption, out_dir: Optional[Path] = OutDirOption, seed: Optional[int] = SeedOption):
    """Transfer operator, Hamiltonian and the spectral condition"""
    config, report = _run_command("spectrum", config_file, out_dir, seed)
    m = config.messages
    transfer = report.results["transfer"]
    if transfer.evidence:
        energies = ", ".join(f"{e:.4f}" for e in transfer.evidence["one_particle_energies"])
        print(m.t("cli.one_particle", energies=energies))
    fe1 = report.results["FE1"]
    if fe1.evidence:
        print(m.t("cli.spectral", m_star=fe1.evidence["M_star"], bound=fe1.evidence["analytic_bound"]))
    _summary(m, report)
    _finish(report)


@app.command()
def bounds(config_file: Path = ConfigOption, out_dir: Optional[Path] = OutDirOption, seed: Optional[int] = SeedOption):
    """Field-energy bound and the local field operator estimates"""
    config, report = _run_command("bounds", config_file, out_dir, seed)
    m = config.messages
    fe2 = report.results["FE2"]
    if fe2.evidence:
        print(m.t("cli.field_bound", sup=fe2.evidence["sup_full"], change=fe2.evidence["relative_change"]))
    _summary(m, report)
    _finish(report)


@app.command()
def analyticity(config_file: Path = ConfigOption, out_dir: Optional[Path] = OutDirOption, seed: Optional[int] = SeedOption):
    """Derivative bounds of the regularised fields and the continuation lemma"""
    config, report = _run_command("analyticity", config_file, out_dir, seed)
    m = config.messages
    for item in report.results["analyticity"].evidence.get("per_epsilon", []):
        print(m.t("cli.derivative_fit", eps=item["epsilon"], m1=item["M1_fit"], gamma=item["gamma_fit"], proof=item["gamma_proof"]))
    _summary(m, report)
    _finish(report)


@app.command()
def density(config_file: Path = ConfigOption, out_dir: Optional[Path] = OutDirOption, seed: Optional[int] = SeedOption):
    """Rank test of localised generator families"""
    config, report = _run_command("density", config_file, out_dir, seed)
    m = config.messages
    result = report.results["theorem2"]
    for region in result.evidence.get("regions", []):
        ranks = ", ".join(str(r) for r in region["ranks"])
        gaps = ", ".join(str(g) for g in region["gaps"])
        print(m.t("cli.density_region", label=region["label"], ranks=ranks, gaps=gaps))
        if region.get("witness_verified") is not None:
            print(m.t("cli.density_witness", degree=region["witness_degree"], overlap=region["witness_overlap"], verified=region["witness_verified"]))
    print(m.t("cli.density_verdict", verdict=result.verdict.value))
    _summary(m, report)
    _finish(report)


@app.command()
def report(config_file: Path = ConfigOption, out_dir: Optional[Path] = OutDirOption):
    """Merge the subcommand outputs into report.json"""
    try:
        config = Config.load(config_file)
        m = config.messages
        path, merged = merge_parts(config.out_dir(out_dir), config.echo(), m)
    except (ConfigError, QuantizerError) as e:
        print(str(e))
        raise typer.Exit(1)
    _summary(m, merged)
    print(m.t("cli.written", path=path))
    _finish(merged)


def main():
    app()


if __name__ == "__main__":
    main()
