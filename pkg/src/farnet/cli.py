"""Command line client for the training service.

Every subcommand builds one HTTP request. By default the request runs
against an in-process copy of the service, so no server needs to be
running; pass --server to talk to a remote instance instead. `serve`
starts the HTTP server itself.
"""

import argparse
import json
import sys

import httpx


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings
    with warnings.catch_warnings():
        # starlette's test client warns about its httpx compatibility shim;
        # harmless for the in-process default transport
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient
    from .service import create_app
    return TestClient(create_app(), raise_server_exceptions=False)


def _int_list(text):
    return [int(v) for v in text.split(",") if v != ""]


def _print_response(resp):
    try:
        body = resp.json()
    except ValueError:
        body = {"detail": resp.text}
    if resp.status_code >= 400:
        detail = body.get("detail", body) if isinstance(body, dict) else body
        print(f"error {resp.status_code}: {detail}", file=sys.stderr)
        return 1
    print(json.dumps(body, indent=1))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="farnet",
                                     description="bearing fault diagnosis pipeline")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-domain dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--domains", type=int, default=3)
    p.add_argument("--train-per-cell", type=int, default=50)
    p.add_argument("--test-per-cell", type=int, default=25)
    p.add_argument("--length", type=int, default=2048)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=None)

    p = sub.add_parser("train", help="train on source domains, test on a target")
    p.add_argument("--data", required=True)
    p.add_argument("--sources", required=True, type=_int_list,
                   help="comma separated source domain ids, e.g. 0,1")
    p.add_argument("--target", required=True, type=int)
    p.add_argument("--out", default=None, help="directory for run artifacts")
    p.add_argument("--variant", default="m4", choices=["m1", "m2", "m3", "m4"])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--p-classes", type=int, default=4)
    p.add_argument("--k-per-class", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--domains", type=_int_list, default=None)

    p = sub.add_parser("ablate", help="compare ablation variants over seeds")
    p.add_argument("--data", required=True)
    p.add_argument("--sources", required=True, type=_int_list)
    p.add_argument("--target", required=True, type=int)
    p.add_argument("--variants", type=lambda t: t.split(","),
                   default=["m1", "m2", "m3", "m4"])
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--p-classes", type=int, default=4)
    p.add_argument("--k-per-class", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("domain-stats", help="amplitude vs phase divergence of domains")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")

    p = sub.add_parser("preview-swap", help="swap amplitude spectra of two records")
    p.add_argument("--data", required=True)
    p.add_argument("--index-a", required=True, type=int)
    p.add_argument("--index-b", required=True, type=int)

    p = sub.add_parser("export-embeddings", help="write per-sample embeddings to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--domains", type=_int_list, default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _request(args):
    if args.command == "synth":
        return "POST", "/synth", {
            "out_dir": args.out, "n_classes": args.classes,
            "n_domains": args.domains,
            "samples_per_cell": [args.train_per_cell, args.test_per_cell],
            "shape": [args.channels, args.length, 1], "seed": args.seed,
            "noise_sigma": args.noise,
        }
    if args.command == "train":
        return "POST", "/train", {
            "data_dir": args.data, "sources": args.sources, "target": args.target,
            "out_dir": args.out, "variant": args.variant, "epochs": args.epochs,
            "p_classes": args.p_classes, "k_per_class": args.k_per_class,
            "seed": args.seed,
        }
    if args.command == "eval":
        return "POST", "/eval", {
            "checkpoint": args.checkpoint, "data_dir": args.data,
            "split": args.split, "domains": args.domains,
        }
    if args.command == "ablate":
        return "POST", "/ablate", {
            "data_dir": args.data, "sources": args.sources, "target": args.target,
            "variants": args.variants, "runs": args.runs, "epochs": args.epochs,
            "p_classes": args.p_classes, "k_per_class": args.k_per_class,
            "seed": args.seed,
        }
    if args.command == "domain-stats":
        return "GET", "/domain-stats", {"data_dir": args.data, "split": args.split}
    if args.command == "preview-swap":
        return "POST", "/preview-swap", {
            "data_dir": args.data, "index_a": args.index_a, "index_b": args.index_b,
        }
    if args.command == "export-embeddings":
        return "POST", "/export-embeddings", {
            "checkpoint": args.checkpoint, "data_dir": args.data,
            "out_path": args.out, "split": args.split, "domains": args.domains,
        }
    raise AssertionError(args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn
        from .service import create_app
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    method, path, body = _request(args)
    try:
        with _client(args.server) as client:
            if method == "GET":
                resp = client.get(path, params=body)
            else:
                resp = client.post(path, json=body)
    except httpx.HTTPError as err:
        print(f"request failed: {err}", file=sys.stderr)
        return 1
    return _print_response(resp)


if __name__ == "__main__":
    sys.exit(main())
