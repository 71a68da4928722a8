import json
import math

import numpy as np
import pytest

from dpwaves.continuation import BranchPoint, ContinuationConfig, continue_branch
from dpwaves.branchio import (
    REQUIRED_FIELDS,
    SchemaError,
    point_to_record,
    read_branch_points,
    read_records,
    record_to_point,
    record_to_state,
    validate_record,
    write_record,
)


@pytest.fixture(scope="module")
def short_branch(bp_desk):
    return continue_branch(bp_desk, ContinuationConfig(max_points=3))


class TestRoundTrip:
    def test_state_round_trips_bit_exact(self, short_branch, tmp_path):
        path = tmp_path / "branch.ndjson"
        with open(path, "w") as fh:
            for p in short_branch.points:
                write_record(fh, p)
        back = read_branch_points(path)
        assert len(back) == len(short_branch.points)
        for orig, loaded in zip(short_branch.points, back):
            assert np.array_equal(loaded.state.coeffs, orig.state.coeffs)
            assert loaded.state.mu == orig.state.mu
            assert loaded.state.a == orig.state.a
            assert loaded.state.residual_norm == orig.state.residual_norm
            assert loaded.s_arclength == orig.s_arclength
            assert loaded.gap_crest == orig.gap_crest
            assert loaded.crest_exponent == orig.crest_exponent

    def test_record_fields_complete(self, short_branch):
        rec = point_to_record(short_branch.points[0])
        assert set(REQUIRED_FIELDS) <= set(rec)
        # records are plain JSON, one per line
        json.dumps(rec)

    def test_nan_crest_exponent_becomes_null(self, short_branch):
        p = short_branch.points[0]
        broken = BranchPoint(p.state, p.s_arclength, p.gap_crest, p.gap_trough,
                             p.newton_iters, float("nan"))
        rec = point_to_record(broken)
        assert rec["crest_exponent"] is None
        assert math.isnan(record_to_point(rec).crest_exponent)


class TestSchemaValidation:
    def test_missing_field_names_line(self, tmp_path):
        path = tmp_path / "bad.ndjson"
        path.write_text('{"schema_version": 1}\n')
        with pytest.raises(SchemaError) as err:
            read_records(path)
        assert err.value.line_number == 1
        assert "missing fields" in str(err.value)

    def test_bad_json_mid_file_is_error(self, short_branch, tmp_path):
        path = tmp_path / "bad.ndjson"
        with open(path, "w") as fh:
            write_record(fh, short_branch.points[0])
            fh.write("{broken\n")
            write_record(fh, short_branch.points[1])
        with pytest.raises(SchemaError) as err:
            read_records(path, tolerate_truncated_tail=True)
        assert err.value.line_number == 2

    def test_truncated_tail_tolerated_only_when_asked(self, short_branch, tmp_path):
        path = tmp_path / "trunc.ndjson"
        with open(path, "w") as fh:
            for p in short_branch.points:
                write_record(fh, p)
        full = path.read_text()
        path.write_text(full[: len(full) - 40])  # clip into the final record
        with pytest.raises(SchemaError):
            read_records(path)
        records = read_records(path, tolerate_truncated_tail=True)
        assert len(records) == len(short_branch.points) - 1

    def test_wrong_version_rejected(self, short_branch):
        rec = point_to_record(short_branch.points[0])
        rec["schema_version"] = 99
        with pytest.raises(SchemaError):
            validate_record(rec, 7)

    def test_coefficient_length_mismatch_rejected(self, short_branch):
        rec = point_to_record(short_branch.points[0])
        rec["cosine_coeffs"] = rec["cosine_coeffs"][:-3]
        with pytest.raises(SchemaError):
            validate_record(rec)

    def test_state_reconstruction_grid(self, short_branch):
        rec = point_to_record(short_branch.points[0])
        st = record_to_state(rec)
        assert st.grid.n_modes == rec["n_modes"]
        assert st.grid.period == rec["P"]
