import io
import json
import subprocess
import sys

import pytest

from biaseval_shim.registry import build_registry, resolve
from biaseval_shim.server import ModelConfig, ShimServer


def run_shim(metric: str, request_lines: str, timeout: float = 30.0) -> bytes:
    proc = subprocess.run(
        [sys.executable, "-m", "biaseval_shim", "--metric", metric],
        input=request_lines.encode("utf-8"), capture_output=True,
        timeout=timeout)
    assert proc.returncode == 0, proc.stderr.decode()
    return proc.stdout


GOLDEN_CONST_REQUESTS = (
    '{"op":"info"}\n'
    '{"op":"score","id":0,"hyp":"a","ref":"b"}\n'
    '{"op":"score","id":1,"hyp":"x y","ref":"x y"}\n'
    '{"op":"shutdown"}\n'
)

GOLDEN_CONST_REPLIES = (
    b'{"name":"constant","symmetric":true,"score_range":[0.5,0.5],'
    b'"supports_multi_ref":false}\n'
    b'{"id":0,"score":0.5}\n'
    b'{"id":1,"score":0.5}\n'
)

GOLDEN_EXACT_REQUESTS = (
    '{"op":"info"}\n'
    '{"op":"score","id":10,"hyp":"same text","ref":"same text"}\n'
    '{"op":"score","id":11,"hyp":"same text","ref":"other text"}\n'
    '{"op":"shutdown"}\n'
)

GOLDEN_EXACT_REPLIES = (
    b'{"name":"exact","symmetric":true,"score_range":[0.0,1.0],'
    b'"supports_multi_ref":false}\n'
    b'{"id":10,"score":1.0}\n'
    b'{"id":11,"score":0.0}\n'
)


def test_constant_golden_transcript():
    assert run_shim("constant", GOLDEN_CONST_REQUESTS) == GOLDEN_CONST_REPLIES


def test_exact_golden_transcript():
    assert run_shim("exact", GOLDEN_EXACT_REQUESTS) == GOLDEN_EXACT_REPLIES


def test_transcript_is_reproducible():
    a = run_shim("constant", GOLDEN_CONST_REQUESTS)
    b = run_shim("constant", GOLDEN_CONST_REQUESTS)
    assert a == b


def test_eof_without_shutdown_exits_cleanly():
    out = run_shim("constant", '{"op":"info"}\n')
    first_golden_line = GOLDEN_CONST_REPLIES.split(b"\n")[0] + b"\n"
    assert out == first_golden_line


def test_bad_json_yields_error_and_loop_survives():
    out = run_shim("exact", 'not json at all\n'
                            '{"op":"score","id":5,"hyp":"a","ref":"a"}\n'
                            '{"op":"shutdown"}\n')
    lines = out.decode().splitlines()
    first = json.loads(lines[0])
    assert first["id"] is None and "bad request" in first["error"]
    assert json.loads(lines[1]) == {"id": 5, "score": 1.0}


def test_unknown_op_and_missing_fields():
    out = run_shim("exact", '{"op":"frobnicate","id":1}\n'
                            '{"op":"score","id":2}\n'
                            '{"op":"shutdown"}\n')
    lines = [json.loads(l) for l in out.decode().splitlines()]
    assert lines[0]["id"] == 1 and "unknown op" in lines[0]["error"]
    assert lines[1]["id"] == 2 and "error" in lines[1]


def test_score_before_info_is_fine():
    out = run_shim("constant", '{"op":"score","id":9,"hyp":"h","ref":"r"}\n'
                               '{"op":"shutdown"}\n')
    assert json.loads(out.decode().splitlines()[0]) == {"id": 9, "score": 0.5}


def test_registry_has_all_metrics():
    names = set(build_registry())
    assert {"constant", "exact", "bertscore", "moverscore", "bleurt",
            "bartscore"} == names


def test_unknown_metric_rejected():
    with pytest.raises(KeyError):
        resolve("nope")
    proc = subprocess.run(
        [sys.executable, "-m", "biaseval_shim", "--metric", "nope"],
        capture_output=True)
    assert proc.returncode != 0


def test_info_reports_missing_backend(monkeypatch):
    metric = resolve("bertscore")
    monkeypatch.setattr(type(metric), "missing_backends",
                        lambda self: ["transformers"])
    payload = metric.info_payload()
    assert payload["name"] == "bertscore"
    assert "transformers" in payload["error"]
    assert payload["model"] == "roberta-large"


def test_model_metrics_info_is_instant():
    # info must answer without loading any model assets
    for name in ("bertscore", "moverscore", "bleurt", "bartscore"):
        out = run_shim(name, '{"op":"info"}\n{"op":"shutdown"}\n',
                       timeout=60.0)
        payload = json.loads(out.decode().splitlines()[0])
        assert payload["name"] == name
        assert "model" in payload


def test_in_process_server_handles_stringio():
    server = ShimServer(resolve("exact"), ModelConfig())
    out = io.StringIO()
    assert server.handle_line('{"op":"info"}', out)
    assert not server.handle_line('{"op":"shutdown"}', out)
    payload = json.loads(out.getvalue().splitlines()[0])
    assert payload["score_range"] == [0.0, 1.0]


def test_score_failure_is_per_request(monkeypatch):
    metric = resolve("exact")
    calls = {"n": 0}

    def flaky_factory(config):
        def score(hyp, ref):
            calls["n"] += 1
            if hyp == "boom":
                raise RuntimeError("model exploded")
            return 0.0
        return score

    monkeypatch.setattr(metric, "factory", flaky_factory)
    server = ShimServer(metric, ModelConfig())
    out = io.StringIO()
    server.handle_line('{"op":"score","id":1,"hyp":"boom","ref":"r"}', out)
    server.handle_line('{"op":"score","id":2,"hyp":"ok","ref":"r"}', out)
    lines = [json.loads(l) for l in out.getvalue().splitlines()]
    assert lines[0]["id"] == 1 and "model exploded" in lines[0]["error"]
    assert lines[1] == {"id": 2, "score": 0.0}
