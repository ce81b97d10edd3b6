import numpy as np
import pytest

from mxconv import cli, container
from mxconv.core import ConversionPolicy, FormatId, SignMode, SpecialPolicy, format_params
from mxconv.selftest import EXAMPLE_WORDS


@pytest.fixture
def example_bin(tmp_path):
    p = tmp_path / "ex.bin"
    np.array(EXAMPLE_WORDS[:4], dtype="<u4").tofile(p)
    return p


def run(*args):
    return cli.main([str(a) for a in args])


def test_convert_example(tmp_path, example_bin, capsys):
    out = tmp_path / "ex.mx"
    assert run("convert", "--format", "e5m2", "--mode", "paper", "--in", example_bin, "--out", out) == 0
    data = out.read_bytes()
    assert data[:4] == b"MX01"
    assert data[4:8] == bytes([0, 0x01, 32, 0])
    assert int.from_bytes(data[8:16], "little") == 4
    assert data[16:] == bytes([0x9C, 0x7A, 0x6F, 0x00, 0x80]) + bytes(28)


def test_convert_128_floats(tmp_path):
    src, dst = tmp_path / "in.bin", tmp_path / "out.mx"
    np.random.default_rng(0).standard_normal(128).astype("<f4").tofile(src)
    assert run("convert", "--format", "e5m2", "--in", src, "--out", dst) == 0
    data = dst.read_bytes()
    assert len(data) == 16 + 4 * (1 + 32)
    assert int.from_bytes(data[8:16], "little") == 128


def test_convert_empty(tmp_path):
    src, dst = tmp_path / "in.bin", tmp_path / "out.mx"
    src.write_bytes(b"")
    assert run("convert", "--format", "e2m1", "--in", src, "--out", dst) == 0
    assert len(dst.read_bytes()) == 16
    assert container.decode(dst.read_bytes())[0].element_count == 0


def test_convert_csv(tmp_path):
    src, dst = tmp_path / "in.csv", tmp_path / "out.mx"
    src.write_text("1.0\n-2.5\n0.125\n")
    assert run("convert", "--format", "e4m3", "--csv", "--in", src, "--out", dst) == 0
    header, arrays = container.decode(dst.read_bytes())
    assert header.element_count == 3 and len(arrays) == 1


def test_usage_errors(tmp_path, example_bin):
    assert run("convert", "--format", "e9m9", "--in", example_bin, "--out", tmp_path / "o") == 1
    assert run("convert", "--format", "e5m2", "--bogus", "--in", example_bin, "--out", tmp_path / "o") == 1
    odd = tmp_path / "odd.bin"
    odd.write_bytes(b"\x00" * 5)
    assert run("convert", "--format", "e5m2", "--in", odd, "--out", tmp_path / "o") == 1


def test_io_error(tmp_path):
    assert run("convert", "--format", "e5m2", "--in", tmp_path / "missing", "--out", tmp_path / "o") == 2
    assert run("inspect", "--in", tmp_path / "missing") == 2


def test_inspect(tmp_path, example_bin, capsys):
    out = tmp_path / "ex.mx"
    run("convert", "--format", "e5m2", "--mode", "paper", "--in", example_bin, "--out", out)
    capsys.readouterr()
    assert run("inspect", "--in", out) == 0
    text = capsys.readouterr().out
    assert "X=0x9C (2^29)" in text
    assert "P1=0 11110 10" in text
    assert "P5=" not in text


def test_inspect_malformed(tmp_path, example_bin):
    out = tmp_path / "ex.mx"
    run("convert", "--format", "e5m2", "--in", example_bin, "--out", out)
    data = out.read_bytes()
    bad = tmp_path / "bad.mx"
    bad.write_bytes(data[:-1])
    assert run("inspect", "--in", bad) == 3
    bad.write_bytes(b"MX02" + data[4:])
    assert run("inspect", "--in", bad) == 3
    bad.write_bytes(data[:6] + b"\x10" + data[7:])
    assert run("inspect", "--in", bad) == 3
    bad.write_bytes(data[:3])
    assert run("inspect", "--in", bad) == 3


def test_stats_zero(tmp_path, capsys):
    src, dst = tmp_path / "z.bin", tmp_path / "z.mx"
    np.zeros(40, dtype="<f4").tofile(src)
    run("convert", "--format", "e5m2", "--in", src, "--out", dst)
    total = cli.stats_files(src, dst, out=lambda *_: None)
    assert total.max_rel_error == 0 and total.compared_count == 40


def test_stats_example_corrected(tmp_path, example_bin):
    dst = tmp_path / "ex.mx"
    run("convert", "--format", "e5m2", "--in", example_bin, "--out", dst)
    total = cli.stats_files(example_bin, dst, out=lambda *_: None)
    assert total.max_rel_error_in_range <= 0.125
    assert total.flushed_count == 1  # V3 only; V4 survives in corrected mode


def test_stats_normal_data_e4m3(tmp_path, capsys):
    src, dst = tmp_path / "n.bin", tmp_path / "n.mx"
    np.random.default_rng(4).standard_normal(32 * 64).astype("<f4").tofile(src)
    run("convert", "--format", "e4m3", "--in", src, "--out", dst)
    capsys.readouterr()
    assert run("stats", "--original", src, "--mx", dst) == 0
    assert "total:" in capsys.readouterr().out
    total = cli.stats_files(src, dst, out=lambda *_: None)
    assert 0 < total.max_rel_error_in_range <= 0.0625


def test_stats_count_mismatch(tmp_path, example_bin):
    dst = tmp_path / "ex.mx"
    run("convert", "--format", "e5m2", "--in", example_bin, "--out", dst)
    other = tmp_path / "other.bin"
    np.zeros(5, dtype="<f4").tofile(other)
    assert run("stats", "--original", other, "--mx", dst) == 1


@pytest.mark.parametrize("fmt, rows, summary", [
    ("e4m3", 16, "0 deviations from Table 4"),
    ("e5m2", 8, "1 deviation from Table 3 (row 010)"),
    ("e3m2", 8, "1 deviation from Table 5 (row 010)"),
    ("e2m1", 4, "1 deviation from Table 7 (row 10)"),
])
def test_tables(fmt, rows, summary, capsys):
    assert run("tables", "--format", fmt) == 0
    lines = capsys.readouterr().out.splitlines()
    body = [l for l in lines[2:] if l.startswith(" ") and "at max" not in l and "row" not in l]
    assert len(body) == rows
    assert summary in lines


@pytest.mark.parametrize("packed", [False, True])
@pytest.mark.parametrize("fid", list(FormatId))
def test_container_roundtrip(fid, packed):
    rng = np.random.default_rng(int(fid))
    words = rng.integers(0, 2**32, size=100, dtype=np.uint64).astype(np.uint32)
    policy = ConversionPolicy(SignMode.PAPER_EXAMPLE, SpecialPolicy.PROPAGATE)
    data = container.encode(words, fid, policy, packed)
    header, arrays = container.decode(data)
    assert header.policy == policy and header.packed == packed and header.element_count == 100
    plain = container.decode(container.encode(words, fid, policy, not packed))[1]
    assert (arrays.codes == plain.codes).all() and (arrays.cls == plain.cls).all()
    assert data == container.encode(words, fid, policy, packed)
    desc = format_params(fid)
    if packed:
        assert header.block_bytes == 1 + 32 * desc.element_bits // 8


def test_padding_is_inert():
    words = np.array([0x3F800000] * 33, dtype=np.uint32)  # 1.0, one spill element
    _, arrays = container.decode(container.encode(words, FormatId.E4M3, ConversionPolicy()))
    assert arrays.x[1] == arrays.x[0] - 0  # same scale for 1.0 regardless of padding
    assert (arrays.codes[1, 1:] == 0).all()


def test_int8_scale_fe_disambiguation():
    normal = np.full(32, (254 << 23) | 1, dtype=np.uint32)
    inf = normal.copy()
    inf[5] = 0x7F800000
    prop = ConversionPolicy(special_policy=SpecialPolicy.PROPAGATE)
    for words, policy, want in [(normal, ConversionPolicy(), 0), (inf, prop, 1)]:
        _, arrays = container.decode(container.encode(words, FormatId.INT8, policy))
        assert arrays.x[0] == 0xFE and arrays.cls[0] == want


def test_selftest_passes(capsys):
    assert run("selftest", "--blocks", "500") == 0


def test_selftest_catches_printed_row(monkeypatch, capsys):
    import mxconv.quant as quant
    real = quant.round_mantissa

    def printed_row(prefix, desc):
        if desc.R == 2 and prefix == 0b010:
            return 0b11, 0
        return real(prefix, desc)

    monkeypatch.setattr(quant, "round_mantissa", printed_row)
    assert run("selftest", "--blocks", "100") != 0
    assert "quantize_element" in capsys.readouterr().out


def test_selftest_catches_wrong_threshold(monkeypatch, capsys):
    from mxconv.core import FormatDescriptor
    monkeypatch.setattr(FormatDescriptor, "scale_threshold", property(lambda d: 1 << (d.K - 1)))
    assert run("selftest", "--blocks", "100") != 0
    assert "scale_temp" in capsys.readouterr().out
