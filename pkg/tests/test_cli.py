import json
import subprocess
import sys

import pytest

from interpool.chainsim.alien import make_spv_proof
from interpool.chainsim.transactions import MainnetTx
from interpool.cli import main
from interpool.core import Amount, Hash256

from instances import large_instance


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_entropy(capsys):
    code, out, _ = run(capsys, "entropy", "--n", "4", "--locked-digits", "1", "--hash-bits", "2", "--exact")
    assert code == 0
    obj = json.loads(out)
    assert obj["orderings"] == "8"
    assert obj["entropy_bits"] == pytest.approx(3.0)


def test_entropy_bad_arguments(capsys):
    code, _, err = run(capsys, "entropy", "--n", "7", "--locked-digits", "1", "--hash-bits", "4")
    assert code == 2 and "error" in err


def test_simulate_bundled(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--scenario", "risk_example", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "blocks.jsonl").exists() and (tmp_path / "final.json").exists()
    summary = json.loads(out[out.index("{"):])
    assert summary["all_checks_pass"] and summary["liquidations"] == 1


def test_simulate_overrides_and_config_file(capsys, tmp_path):
    cfg = {"schema_version": 1, "name": "t", "blocks": 1, "poe": {"enabled": False},
           "pool": {"providers": [{"owner": "lp", "deposit": "50"}]}, "workload": {"tx_per_block": 3}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "simulate", "--config", str(path), "--seed", "4", "--blocks", "2")
    assert code == 0
    obj = json.loads(out)
    assert obj["seed"] == 4 and obj["blocks"] == 2


def test_simulate_bad_config(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 9}))
    assert run(capsys, "simulate", "--config", str(path))[0] == 2
    assert run(capsys, "simulate", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_swap_demo(capsys):
    code, out, _ = run(capsys, "swap-demo")
    obj = json.loads(out)
    assert code == 0
    assert obj["happy_path"]["state"] == "completed" and obj["timeout"]["state"] == "failed"


@pytest.fixture
def proof_file(tmp_path, busy_chain):
    block = busy_chain.blocks[5]
    proof = make_spv_proof(block, 3)
    path = tmp_path / "proof.json"
    path.write_text(json.dumps(proof.to_json()))
    return path, block.header_hash


def test_verify_proof(capsys, proof_file):
    path, forged = proof_file
    code, out, _ = run(capsys, "verify-proof", "--proof", str(path), "--forged", forged.hex())
    assert code == 0 and json.loads(out)["valid"]
    code, out, _ = run(capsys, "verify-proof", "--proof", str(path), "--forged", Hash256.zero().hex())
    assert code == 1 and json.loads(out)["reason"] == "header-mismatch"
    assert run(capsys, "verify-proof", "--proof", str(path), "--forged", "zz")[0] == 2


def _batch_file(tmp_path, n, hash_bits):
    txs, params, snap = large_instance(17, n=n, hash_bits=hash_bits)
    path = tmp_path / "batch.json"
    path.write_text(json.dumps({
        "pool": {"intertoken": str(Amount(snap.intertoken)), "native": str(Amount(snap.native)), "fee_rate": "0.003"},
        "hash_bits": hash_bits,
        "txs": [t.to_json() for t in txs],
    }))
    return path, params


def test_optimize(capsys, tmp_path):
    path, params = _batch_file(tmp_path, 64, 16)
    code, out, _ = run(capsys, "optimize", "--batch", str(path), "--target", params.target_hashes[0].hex(),
                       "--booster-key", params.booster_pubkey.hex(), "--move-budget", "100", "--restarts", "0")
    obj = json.loads(out)
    assert code == 0 and obj["constraints_ok"]
    assert obj["reconstructed"][0][:4] == params.target_hashes[0].hex()[:4]


def test_optimize_batch_shorter_than_prefix(capsys, tmp_path):
    path, params = _batch_file(tmp_path, 8, 16)
    code, _, err = run(capsys, "optimize", "--batch", str(path), "--target", params.target_hashes[0].hex())
    assert code == 2 and "forging prefix" in err


def test_optimize_unreachable_target(capsys, tmp_path):
    path, params = _batch_file(tmp_path, 8, 8)
    txs = json.loads(path.read_text())["txs"]
    firsts = {MainnetTx.from_json(t).tx_hash.bit(0) for t in txs}
    # eight leading ones need eight txs whose first bit is one; the batch has only a mix
    target = Hash256.from_bits("1" * 256)
    code, _, err = run(capsys, "optimize", "--batch", str(path), "--target", target.hex())
    assert firsts == {0, 1}
    assert code == 1 and "infeasible" in err


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "interpool.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "entropy", "optimize", "verify-proof", "swap-demo"):
        assert cmd in res.stdout
