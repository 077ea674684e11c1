#!/usr/bin/env python3
"""Validates every kind of `ecolabel --json` output against `ecolabel schema`."""

import argparse
import json
import subprocess
import sys
import tempfile
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import jsonschema


class Stub(BaseHTTPRequestHandler):
    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        time.sleep(0.01)
        body = b'{"label": "positive"}'
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--fixtures", required=True)
    args = ap.parse_args()
    fixtures = Path(args.fixtures)

    schema = json.loads(subprocess.run([args.cli, "schema"], check=True, capture_output=True, text=True).stdout)
    jsonschema.Draft202012Validator.check_schema(schema)

    def validator(name):
        return jsonschema.Draft202012Validator({"$ref": f"#/$defs/{name}", "$defs": schema["$defs"]})

    server = ThreadingHTTPServer(("127.0.0.1", 0), Stub)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    endpoint = f"http://127.0.0.1:{server.server_address[1]}/predict"

    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        store = str(Path(tmp) / "store.json")
        samples = Path(tmp) / "samples.json"
        samples.write_text('[{"text": "great"}]')

        def run(argv, expect_code):
            proc = subprocess.run([args.cli, "--store", store, "--json", *argv], capture_output=True, text=True)
            if proc.returncode != expect_code:
                raise SystemExit(f"{argv}: exit {proc.returncode}, expected {expect_code}\n{proc.stderr}{proc.stdout}")
            return json.loads(proc.stdout)

        cases = [
            (["label", "training", "--model", "a", "--values", "co2e_kg=2,accuracy=0.8"], 0, "energy_label", None),
            (["label", "inference", "--model", "b", "--values", "running_time_s=0.5"], 0, "energy_label", None),
            (["label", "training", "--model", "c", "--file", str(fixtures / "emissions.csv")], 0, "energy_label", None),
            (["label", "inference", "--model", "d", "--probe-endpoint", endpoint, "--samples", str(samples),
              "--power-watts", "150"], 0, "energy_label", "label"),
            (["label", "inference", "--model", "d", "--probe-endpoint", endpoint, "--samples", str(samples),
              "--power-watts", "150"], 0, "probe_result", "probe"),
            (["sync", "huggingface", "--fixtures", str(fixtures / "providers" / "hf5")], 0, "sync_run", None),
            (["sync", "huggingface", "--fixtures", str(fixtures / "providers" / "hf_malformed")], 0, "sync_run", None),
            (["config", "show", "--phase", "training"], 0, "efficiency_config", None),
            (["config", "set", "--weight", "co2e_kg=3"], 0, "efficiency_config", None),
            (["config", "calibrate", "--phase", "training"], 0, "efficiency_config", None),
            (["label", "training", "--model", "e", "--values", "co2e_kg=-1"], 1, "error_envelope", None),
            (["sync", "nowhere"], 1, "error_envelope", None),
            (["config", "set", "--all-boundaries", "1,2"], 1, "error_envelope", None),
            (["label", "inference", "--model", "f", "--probe-endpoint", "http://127.0.0.1:1/x", "--samples",
              str(samples), "--timeout", "2"], 1, "error_envelope", None),
        ]
        for argv, code, name, key in cases:
            doc = run(argv, code)
            if key:
                doc = doc[key]
            errors = list(validator(name).iter_errors(doc))
            status = "ok" if not errors else "INVALID"
            print(f"{status:8} {name:18} {' '.join(argv[:3])}")
            for e in errors:
                failures += 1
                print(f"    {e.json_path}: {e.message}")

    server.shutdown()
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
