import pytest

from powersched.case import CaseParseError, CaseValidationError, bundled_case_path, load_case, parse_case


def test_bundled_118_counts(case118):
    assert case118.n_bus == 118
    assert len(case118.branches) == 186
    assert len(case118.generators) == 54


def test_bundled_118_reference_is_slack(case118):
    ref = case118.generators[case118.reference_generator]
    assert ref.bus == 69
    assert case118.skipped_records == 2


def test_empty_text_rejected():
    with pytest.raises(CaseParseError):
        parse_case("")
    with pytest.raises(CaseParseError):
        parse_case("   \n", "native")


def test_native_two_bus_round_trip():
    text = "bus 1 3 0 0 0 0\nbus 2 1 0.5 0.1 0 0\nbranch 1 2 0.013 0.17\ngen 1 0.0\n"
    case = parse_case(text, "native")
    (br,) = case.branches
    assert (br.from_bus, br.to_bus, br.r, br.x, br.b, br.tap) == (1, 2, 0.013, 0.17, 0.0, 1.0)
    assert case.buses[1].p_load == 0.5


def test_native_unknown_records_counted():
    text = "bus 1 3 0 0 0 0\nbus 2 1 0 0 0 0\nzone 7\nbranch 1 2 0 0.1\ngen 1 0\n"
    assert parse_case(text, "native").skipped_records == 1


def test_native_malformed_line_number():
    text = "bus 1 3 0 0 0 0\nbranch 1 2 x 0.1\n"
    with pytest.raises(CaseParseError) as err:
        parse_case(text, "native")
    assert err.value.lineno == 2


def test_dangling_branch_rejected():
    text = "bus 1 3 0 0 0 0\nbranch 1 9 0 0.1\ngen 1 0\n"
    with pytest.raises(CaseValidationError):
        parse_case(text, "native")


def test_no_generator_rejected():
    with pytest.raises(CaseValidationError):
        parse_case("bus 1 3 0 0 0 0\nbus 2 1 0 0 0 0\nbranch 1 2 0 0.1\n", "native")


def test_cdf_malformed_field_has_line(case118):
    from powersched.case import bundled_case_path

    lines = bundled_case_path().read_text().splitlines()
    lines[2] = lines[2][:40] + "abcdefghi" + lines[2][49:]
    with pytest.raises(CaseParseError) as err:
        parse_case("\n".join(lines))
    assert err.value.lineno == 3


def test_format_detected_from_content(tmp_path):
    from conftest import TOY_TEXT

    path = tmp_path / "toy.txt"
    path.write_text(TOY_TEXT)
    assert load_case(path).n_bus == 3
    cdf = tmp_path / "c.dat"
    cdf.write_text(bundled_case_path().read_text())
    assert load_case(cdf).n_bus == 118
