import hashlib
from pathlib import Path

import pytest

from spfigures.render import (EmptyInput, KIND_SCHEMAS, SchemaMismatch,
                              main, render)

FIX = Path(__file__).parent / "fixtures"

KIND_INPUTS = {
    "profiles": ["profile_b0.csv", "profile_b1.csv"],
    "mass-vs-E": ["branch_multi.csv"],
    "loglog-mass": ["rescale_b0.csv"],
    "Lpm-spectrum": ["spectrum_b1.csv"],
    "JL-complex-plane": ["spectrum_b0.csv", "spectrum_b1.csv"],
    "sigma-vs-E": ["transition_b1.csv"],
    "spacetime-heatmap": ["snapshots_b1.csv"],
    "invariant-trace": ["trace_b1.csv"],
}


def _paths(names):
    return [str(FIX / n) for n in names]


class TestAllKinds:
    @pytest.mark.parametrize("kind", sorted(KIND_INPUTS))
    def test_renders_and_is_pixel_deterministic(self, kind, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{kind}-{tag}.png"
            render(kind, _paths(KIND_INPUTS[kind]), out)
            assert out.exists() and out.stat().st_size > 4000
            outs.append(hashlib.sha256(out.read_bytes()).hexdigest())
        assert outs[0] == outs[1]

    @pytest.mark.parametrize("kind", sorted(KIND_INPUTS))
    def test_inputs_unmodified(self, kind, tmp_path):
        before = [Path(p).read_bytes() for p in _paths(KIND_INPUTS[kind])]
        render(kind, _paths(KIND_INPUTS[kind]), tmp_path / "x.png")
        after = [Path(p).read_bytes() for p in _paths(KIND_INPUTS[kind])]
        assert before == after


class TestValidation:
    def test_schema_mismatch_rejected(self, tmp_path):
        with pytest.raises(SchemaMismatch):
            render("mass-vs-E", _paths(["trace_b1.csv"]), tmp_path / "x.png")
        with pytest.raises(SchemaMismatch):
            render("spacetime-heatmap", _paths(["branch_multi.csv"]),
                   tmp_path / "x.png")

    def test_every_kind_rejects_foreign_schema(self, tmp_path):
        wrong = {"profiles": "branch_multi.csv",
                 "mass-vs-E": "profile_b0.csv",
                 "loglog-mass": "trace_b1.csv",
                 "Lpm-spectrum": "transition_b1.csv",
                 "JL-complex-plane": "trace_b1.csv",
                 "sigma-vs-E": "spectrum_b0.csv",
                 "spacetime-heatmap": "rescale_b0.csv",
                 "invariant-trace": "snapshots_b1.csv"}
        for kind, bad in wrong.items():
            with pytest.raises(SchemaMismatch):
                render(kind, _paths([bad]), tmp_path / "x.png")

    def test_empty_body_rejected(self, tmp_path):
        with pytest.raises(EmptyInput):
            render("mass-vs-E", _paths(["empty_branch.csv"]),
                   tmp_path / "x.png")

    def test_missing_schema_header_rejected(self, tmp_path):
        p = tmp_path / "plain.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaMismatch):
            render("mass-vs-E", [str(p)], tmp_path / "x.png")


class TestCli:
    def test_success_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        rc = main(["mass-vs-E", *_paths(["branch_multi.csv"]),
                   "-o", str(out)])
        assert rc == 0 and out.exists()

    def test_mismatch_exit_two(self, tmp_path, capsys):
        rc = main(["mass-vs-E", *_paths(["trace_b1.csv"]),
                   "-o", str(tmp_path / "fig.png")])
        assert rc == 2
        assert "schema" in capsys.readouterr().err

    def test_missing_file_exit_two(self, tmp_path):
        rc = main(["profiles", str(tmp_path / "nope.csv"),
                   "-o", str(tmp_path / "fig.png")])
        assert rc == 2
