"""Command-line front door: a thin client of the evaluation service.

By default every command drives the service in-process through an ASGI
transport, so offline runs touch no sockets; ``--server-url`` (or
``HSBR_SERVER_URL``) points the same commands at a remote instance.
Artifacts are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path

import httpx

import hsbr

EXIT_CODES = {
    "validation": 1,
    "processing": 2,
    "network": 3,
    "semantic-unavailable": 4,
}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.kind, 2)


class ServiceClient:
    """POSTs to the service: in-process ASGI by default, HTTP otherwise."""

    def __init__(self, server_url: str | None = None, timeout: float = 600.0):
        self.server_url = server_url
        self.timeout = timeout
        self._app = None
        if server_url is None:
            from hsbr.service.app import create_app

            self._app = create_app()

    def post(self, path: str, payload: dict) -> dict:
        async def go() -> httpx.Response:
            if self._app is not None:
                transport = httpx.ASGITransport(app=self._app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://hsbr.service",
                    timeout=self.timeout,
                ) as client:
                    return await client.post(path, json=payload)
            async with httpx.AsyncClient(
                base_url=self.server_url, timeout=self.timeout
            ) as client:
                return await client.post(path, json=payload)

        try:
            response = asyncio.run(go())
        except httpx.TransportError as exc:
            raise CliError("network", f"service unreachable: {exc}") from exc
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail")
            except ValueError:
                detail = None
            if isinstance(detail, dict) and "kind" in detail:
                raise CliError(detail["kind"], detail.get("message", ""))
            raise CliError(
                "processing",
                f"service error HTTP {response.status_code}: {response.text[:200]}")
        return response.json()


def write_atomic(path: Path, data: bytes) -> None:
    """Write via a temp file and rename; no partial file at the final path."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _canonical(payload: dict) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False)
            + "\n").encode("utf-8")


def _require_file(value: str, what: str) -> str:
    if not Path(value).is_file():
        raise CliError("validation", f"{what} not found: {value}")
    return value


def _safe_name(repo_id: str) -> str:
    return repo_id.replace("/", "__")


def _semantic_payload(args) -> dict:
    return {"backend": args.semantic, "model": args.semantic_model}


def _add_semantic_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--semantic", choices=["off", "mock", "http"],
                        default="off", help="semantic backend (default: off)")
    parser.add_argument("--semantic-model", default="gpt-4o",
                        help="model name for the http backend")


def cmd_ingest_debian(args, client: ServiceClient) -> int:
    _require_file(args.index, "packages index")
    _require_file(args.map, "package map")
    result = client.post("/debian/impact", {
        "index_path": str(Path(args.index).resolve()),
        "package_map_path": str(Path(args.map).resolve()),
    })
    write_atomic(Path(args.out), _canonical(result))
    print(f"wrote {args.out} ({len(result['repos'])} repositories, "
          f"{result['package_count']} packages)")
    return 0


def cmd_fetch(args, client: ServiceClient) -> int:
    result = client.post("/fetch", {
        "repo": args.repo,
        "api_base": args.api_base,
        "max_prs": args.max_prs,
        "max_commits": args.max_commits,
        "max_issues": args.max_issues,
        "fixture_dir": str(Path(args.out).resolve()),
    })
    print(f"fetched {result['repo_id']}: {result['pull_requests']} PRs, "
          f"{result['commits']} commits, {result['issues']} issues "
          f"-> {result['saved_to']}")
    return 0


def cmd_scan(args, client: ServiceClient) -> int:
    if not Path(args.tree).is_dir():
        raise CliError("validation", f"tree not found: {args.tree}")
    result = client.post("/scan", {
        "tree_path": str(Path(args.tree).resolve()),
        "semantic": _semantic_payload(args),
    })
    write_atomic(Path(args.out), _canonical(result))
    print(f"wrote {args.out} ({len(result['binary_files'])} binary files)")
    return 0


def cmd_calibrate(args, client: ServiceClient) -> int:
    _require_file(args.corpus, "corpus config")
    result = client.post("/calibrate", {
        "corpus_path": str(Path(args.corpus).resolve()),
        "semantic": _semantic_payload(args),
    })
    write_atomic(Path(args.out), _canonical(result["calibration"]))
    print(f"wrote {args.out} (calibration {result['calibration_id']}, "
          f"{result['repositories']} repositories)")
    return 0


def cmd_score(args, client: ServiceClient) -> int:
    _require_file(args.corpus, "corpus config")
    _require_file(args.calibration, "calibration file")
    payload = {
        "corpus_path": str(Path(args.corpus).resolve()),
        "calibration_path": str(Path(args.calibration).resolve()),
        "semantic": _semantic_payload(args),
        "medium_threshold": args.medium_threshold,
        "high_threshold": args.high_threshold,
        "include_markdown": args.markdown,
    }
    if args.weights:
        payload["weights_path"] = _require_file(args.weights, "weight file")
    result = client.post("/score", payload)
    out_dir = Path(args.out_dir)
    for report in result["reports"]:
        write_atomic(out_dir / f"{_safe_name(report['repo_id'])}.json",
                     _canonical(report))
    for repo_id, markdown in result["markdown"].items():
        write_atomic(out_dir / f"{_safe_name(repo_id)}.md",
                     markdown.encode("utf-8"))
    write_atomic(out_dir / "reports.csv", result["csv"].encode("utf-8"))
    write_atomic(out_dir / "summary.json", _canonical(result["summary"]))
    print(f"wrote {len(result['reports'])} report(s), reports.csv and "
          f"summary.json to {out_dir}")
    return 0


def cmd_report(args, client: ServiceClient) -> int:
    _require_file(args.report, "report file")
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError("validation", f"report file is not JSON: {exc}") from exc
    result = client.post("/report/render", {"report": report, "format": args.format})
    if args.out:
        write_atomic(Path(args.out), result["content"].encode("utf-8"))
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(result["content"])
    return 0


def cmd_sensitivity(args, client: ServiceClient) -> int:
    _require_file(args.corpus, "corpus config")
    _require_file(args.calibration, "calibration file")
    payload = {
        "corpus_path": str(Path(args.corpus).resolve()),
        "calibration_path": str(Path(args.calibration).resolve()),
        "semantic": _semantic_payload(args),
        "runs": args.runs,
        "seed": args.seed,
    }
    if args.weights:
        payload["weights_path"] = _require_file(args.weights, "weight file")
    result = client.post("/sensitivity", payload)
    out_dir = Path(args.out_dir)
    write_atomic(out_dir / "sensitivity.json", _canonical(result["report"]))
    write_atomic(out_dir / "sensitivity.txt",
                 result["summary_text"].encode("utf-8"))
    summary = result["report"]["summary"]
    print(f"wrote sensitivity.json and sensitivity.txt to {out_dir} "
          f"(min rho {summary['min_spearman']:.4f})")
    return 0


def cmd_correlate(args, client: ServiceClient) -> int:
    _require_file(args.corpus, "corpus config")
    _require_file(args.calibration, "calibration file")
    payload = {
        "corpus_path": str(Path(args.corpus).resolve()),
        "calibration_path": str(Path(args.calibration).resolve()),
        "semantic": _semantic_payload(args),
    }
    if args.weights:
        payload["weights_path"] = _require_file(args.weights, "weight file")
    result = client.post("/correlate", payload)
    out_dir = Path(args.out_dir)
    write_atomic(out_dir / "correlations.csv", result["csv"].encode("utf-8"))
    write_atomic(out_dir / "correlations.json", _canonical(
        {"metrics": result["metrics"], "matrix": result["matrix"]}))
    print(f"wrote correlations.csv and correlations.json to {out_dir}")
    return 0


def cmd_serve(args, client: ServiceClient) -> int:
    import uvicorn

    uvicorn.run("hsbr.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsbr",
        description="High-stealth backdoor risk evaluation for open-source repositories",
    )
    parser.add_argument("--version", action="version", version=hsbr.__version__)
    parser.add_argument("--server-url", default=os.environ.get("HSBR_SERVER_URL"),
                        help="remote service URL (default: run in-process)")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser(
        "ingest-debian", help="parse a packages index and compute dependency impact")
    ingest.add_argument("--index", required=True, help="Packages index (.gz ok)")
    ingest.add_argument("--map", required=True, help="repo->packages map (TSV)")
    ingest.add_argument("--out", required=True, help="output JSON path")
    ingest.set_defaults(func=cmd_ingest_debian)

    fetch = commands.add_parser("fetch", help="collect a repository snapshot")
    fetch.add_argument("repo", help="owner/name")
    fetch.add_argument("--out", required=True, help="fixture directory")
    fetch.add_argument("--api-base", default="https://api.github.com")
    fetch.add_argument("--max-prs", type=int, default=500)
    fetch.add_argument("--max-commits", type=int, default=1000)
    fetch.add_argument("--max-issues", type=int, default=300)
    fetch.set_defaults(func=cmd_fetch)

    scan = commands.add_parser("scan", help="scan a file tree for binary payloads")
    scan.add_argument("tree", help="repository checkout directory")
    scan.add_argument("--out", required=True, help="output JSON path")
    _add_semantic_flags(scan)
    scan.set_defaults(func=cmd_scan)

    calibrate = commands.add_parser(
        "calibrate", help="compute corpus percentiles into a calibration file")
    calibrate.add_argument("--corpus", required=True, help="corpus config JSON")
    calibrate.add_argument("--out", required=True, help="calibration file path")
    _add_semantic_flags(calibrate)
    calibrate.set_defaults(func=cmd_calibrate)

    score = commands.add_parser(
        "score", help="score a corpus against a frozen calibration")
    score.add_argument("--corpus", required=True)
    score.add_argument("--calibration", required=True)
    score.add_argument("--out-dir", required=True)
    score.add_argument("--weights", help="weight config file")
    score.add_argument("--markdown", action="store_true",
                       help="also emit per-repository markdown")
    score.add_argument("--medium-threshold", type=float, default=0.33)
    score.add_argument("--high-threshold", type=float, default=0.66)
    _add_semantic_flags(score)
    score.set_defaults(func=cmd_score)

    report = commands.add_parser("report", help="re-render a report file")
    report.add_argument("--report", required=True, help="report JSON path")
    report.add_argument("--format", choices=["json", "markdown", "csv-row"],
                        required=True)
    report.add_argument("--out", help="output path (default: stdout)")
    report.set_defaults(func=cmd_report)

    sensitivity = commands.add_parser(
        "sensitivity", help="weight-perturbation robustness analysis")
    sensitivity.add_argument("--corpus", required=True)
    sensitivity.add_argument("--calibration", required=True)
    sensitivity.add_argument("--out-dir", required=True)
    sensitivity.add_argument("--weights")
    sensitivity.add_argument("--runs", type=int, default=10)
    sensitivity.add_argument("--seed", type=int, required=True)
    _add_semantic_flags(sensitivity)
    sensitivity.set_defaults(func=cmd_sensitivity)

    correlate = commands.add_parser(
        "correlate", help="cross-metric correlation matrix")
    correlate.add_argument("--corpus", required=True)
    correlate.add_argument("--calibration", required=True)
    correlate.add_argument("--out-dir", required=True)
    correlate.add_argument("--weights")
    _add_semantic_flags(correlate)
    correlate.set_defaults(func=cmd_correlate)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        client = ServiceClient(server_url=args.server_url)
        return args.func(args, client)
    except CliError as error:
        sys.stderr.write(json.dumps(
            {"error": error.kind, "message": error.message}) + "\n")
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
