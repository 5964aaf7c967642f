import argparse
import asyncio
import logging
import sys
from typing import Any, Dict, List, Optional

from regretobserver import regretobserver_help
from regretobserver import regretobserver_selftest
from regretobserver import regretobserver_setup
from regretobserver.tools import ro_bench
from regretobserver.tools import ro_disturbance
from regretobserver.tools import ro_errors
from regretobserver.tools import ro_report
from regretobserver.tools import ro_sls
from regretobserver.tools import ro_synthesis

logger = logging.getLogger("regretobserver")

TOOL_NAME = "regretobserver"
TOOL_VERSION = "0.1.0"

OPS = ("synth", "eval", "bench", "selftest", "help")


def _parse_set(pairs: Optional[List[str]]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ro_errors.BadConfig("--set expects key=value, got %r" % pair)
        k, v = pair.split("=", 1)
        out[k.strip()] = v.strip()
    return out


class ObserverToolkit:
    """Runs one op and renders the outcome as text; exit_code holds the process status."""

    def __init__(self):
        self.exit_code = ro_errors.EXIT_OK

    def run(self, op: str, args: Optional[Dict[str, Any]] = None) -> str:
        args = args or {}
        self.exit_code = ro_errors.EXIT_OK
        if not op or op == "help":
            return regretobserver_help.HELP
        try:
            if op == "synth":
                return self._synth(args)
            elif op == "eval":
                return self._eval(args)
            elif op == "bench":
                return self._bench(args)
            elif op == "selftest":
                return self._selftest(args)
            else:
                self.exit_code = ro_errors.EXIT_BAD_INPUT
                return f"❌ Unknown operation: {op}\n\nTry '{TOOL_NAME} help' for usage."
        except ro_errors.RegretObserverError as e:
            self.exit_code = ro_errors.exit_code_for(e)
            logger.debug("%s failed", op, exc_info=True)
            return f"❌ Error: {type(e).__name__}: {e}"
        except Exception as e:
            logger.exception("%s crashed", op)
            self.exit_code = 1
            return f"❌ Error: {type(e).__name__}: {e}"

    def _setup(self, args: Dict[str, Any], flags: Dict[str, Any]) -> Dict[str, Any]:
        overrides: Dict[str, Any] = _parse_set(args.get("set"))
        overrides.update({k: v for k, v in flags.items() if v is not None})
        return regretobserver_setup.load_bench_config(args.get("config"), overrides)

    def _synth(self, args: Dict[str, Any]) -> str:
        setup = self._setup(args, {
            "system": args.get("system"),
            "horizon": args.get("horizon"),
            "ts": args.get("ts"),
            "discretization": "euler" if args.get("euler") else None,
        })
        config = regretobserver_setup.bench_config_from_setup(setup)
        method = args.get("method") or "h2"
        try:
            method = ro_synthesis.SynthesisMethod(method)
        except ValueError:
            raise ro_errors.BadConfig("unknown method %r, expected h2, hinf, clairvoyant or regret" % method)
        prob, _ = ro_bench.build_problem(config)
        result = ro_synthesis.synthesize(method, prob, config.solver_options())
        result.settings = config.settings()
        residual = ro_sls.achievability_residual(result.maps, prob.ops)
        out = [
            f"✅ {method.value} observer for {config.system} (n={prob.n}, m={prob.m}, T={prob.T})",
            f"  objective: {result.objective!r}",
            f"  achievability residual: {residual:.3e}",
        ]
        if result.certificate is not None:
            out.append(f"  regret bound lambda*: {result.certificate.lambda_star!r}")
        if args.get("out"):
            ro_report.save_maps_json(result, args["out"])
            out.append(f"  maps written to {args['out']}")
        return "\n".join(out)

    def _eval(self, args: Dict[str, Any]) -> str:
        if not args.get("maps"):
            raise ro_errors.BadConfig("eval needs --maps")
        stored = ro_report.load_maps_json(args["maps"])
        settings = {k: v for k, v in stored.settings.items()}
        settings.update(_parse_set(args.get("set")))
        if args.get("realizations") is not None:
            settings["realizations"] = args["realizations"]
        if args.get("seed") is not None:
            settings["seed"] = args["seed"]
        setup = regretobserver_setup.setup_mixing_procedure(regretobserver_setup.BENCH_SETUP_SCHEMA, settings)
        config = regretobserver_setup.bench_config_from_setup(setup)
        prob, _ = ro_bench.build_problem(config)
        if stored.maps.Phi_v.shape != (prob.ops.ne, prob.ops.nv):
            raise ro_errors.DimensionMismatch("maps do not fit %s with horizon %d" % (config.system, config.horizon))
        kind = ro_disturbance.parse_pattern(args.get("pattern") or "gaussian")
        spec = ro_bench.pattern_spec(kind, config)
        avg = ro_bench.evaluate_pattern(stored.maps, prob, spec, config.realizations)
        count = config.realizations if spec.stochastic else 1
        return "\n".join([
            f"📊 {stored.method.value} observer on {config.system}, pattern {kind.value} ({count} realization(s), seed {config.seed})",
            f"  avg_cost: {avg!r}",
            f"  h2_cost: {ro_synthesis.h2_cost(stored.maps, prob)!r}",
            f"  hinf_cost: {ro_synthesis.hinf_cost(stored.maps, prob)!r}",
        ])

    async def _bench_all(self, configs: List[ro_bench.BenchConfig]) -> List[ro_bench.ResultTable]:
        return list(await asyncio.gather(*[ro_bench.run_benchmark_async(c) for c in configs]))

    def _bench(self, args: Dict[str, Any]) -> str:
        setup = self._setup(args, {
            "system": args.get("system"),
            "realizations": args.get("realizations"),
            "seed": args.get("seed"),
            "workers": args.get("workers"),
        })
        systems = [s.strip() for s in str(setup["system"]).split(",") if s.strip()]
        if not systems:
            raise ro_errors.BadConfig("no system given")
        configs = [regretobserver_setup.bench_config_from_setup(setup, system=s) for s in systems]
        tables = asyncio.run(self._bench_all(configs))
        table = tables[0] if len(tables) == 1 else ro_bench.average_tables(tables)
        fmt = args.get("format") or "markdown"
        try:
            fmt = ro_report.ReportFormat(fmt)
        except ValueError:
            raise ro_errors.BadConfig("unknown format %r, expected csv, json or markdown" % fmt)
        failed = [c for r in table.rows for c in r.cells if c.error is not None]
        if failed:
            self.exit_code = ro_errors.EXIT_SOLVER
        if args.get("out"):
            ro_report.export_results(table, fmt, args["out"])
            text = f"✅ {fmt.value} results for {table.system} written to {args['out']}"
        else:
            text = ro_report.RENDERERS[fmt](table).rstrip("\n")
        if failed:
            text += "\n" + "\n".join(f"❌ {c.pattern}/{c.observer}: {c.error}" for c in failed)
        return text

    def _selftest(self, args: Dict[str, Any]) -> str:
        results = regretobserver_selftest.run_selftest()
        lines = []
        for r in results:
            lines.append(f"{'✅' if r.passed else '❌'} {r.name}: {r.detail}")
        if not all(r.passed for r in results):
            self.exit_code = ro_errors.EXIT_SOLVER
        return "\n".join(lines)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become BadConfig, so they share the bad-input exit code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ro_errors.BadConfig(message)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog=TOOL_NAME, description="Finite-horizon H2, H∞ and minimal-regret observers")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="op")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value settings file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")

    p = sub.add_parser("synth", help="synthesize one observer")
    common(p)
    p.add_argument("--system")
    p.add_argument("--method", choices=[m.value for m in ro_synthesis.SynthesisMethod], default="h2")
    p.add_argument("--horizon", type=int)
    p.add_argument("--ts", type=float)
    p.add_argument("--euler", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("eval", help="evaluate stored maps under a disturbance pattern")
    common(p)
    p.add_argument("--maps", required=True)
    p.add_argument("--pattern", default="gaussian")
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("bench", help="compare H2, H∞ and minimal-regret observers")
    common(p)
    p.add_argument("--system")
    p.add_argument("--format", choices=[f.value for f in ro_report.ReportFormat], default="markdown")
    p.add_argument("--out")
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)

    sub.add_parser("selftest", help="oracle and invariant checks")
    sub.add_parser("help", help="usage")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except ro_errors.BadConfig as e:
        print(f"❌ Error: BadConfig: {e}")
        return ro_errors.EXIT_BAD_INPUT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    toolkit = ObserverToolkit()
    text = toolkit.run(args.op or "help", vars(args))
    print(text)
    return toolkit.exit_code


if __name__ == "__main__":
    sys.exit(main())
