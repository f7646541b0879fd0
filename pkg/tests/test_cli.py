"""命令行测试"""
import json
import sys
import tempfile
import unittest
from unittest import mock
from pathlib import Path

# 添加项目路径到 sys.path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from cse_compress.cli import main
from cse_compress.codec import CompressedMatrix, decode, encode, storage_report
from cse_compress.config import settings
from cse_compress.extractor import CseSet, CseTerm, ExtractConfig, run_extraction
from cse_compress.matrix import DenseMatrix
from cse_compress.matrix_io import load_dense, load_matrix, read_sidecar, save_compressed, save_dense

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

WORKED = DenseMatrix.from_rows([[2, 0, 1, 0], [2, 0, 1, 0], [0, 3, 0, 5], [2, 0, 0, 5]])


class TestCli(unittest.TestCase):
    """测试各个子命令及退出码"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name: str) -> str:
        return str(self.dir / name)

    def worked_compressed_file(self) -> str:
        remainder = DenseMatrix.from_rows([[0, 0, 0, 0], [0, 0, 0, 0], [0, 3, 0, 5], [2, 0, 0, 5]])
        c = encode(remainder, CseSet((CseTerm(0, 2, 2, 1, (0, 1)),)), (4, 4))
        save_compressed(c, Path(self.path("worked.csem")))
        return self.path("worked.csem")

    def test_generate(self):
        code = main(["generate", "-M", "100", "-N", "100", "--alpha", "0.25", "-U", "2",
                     "--seed", "7", "-o", self.path("m.csem")])
        self.assertEqual(code, 0)
        m = load_dense(Path(self.path("m.csem")))
        self.assertEqual(m.nnz, 2500)
        meta = read_sidecar(Path(self.path("m.csem")))
        self.assertEqual(meta["seed"], 7)
        self.assertEqual(meta["alpha"], 0.25)
        self.assertEqual(meta["unique_values"], 2)
        self.assertEqual(meta["nnz"], 2500)

    def test_generate_other_formats(self):
        for name in ("m.json", "m.csv"):
            code = main(["generate", "-M", "12", "-N", "9", "--alpha", "0.5", "-U", "4",
                         "--seed", "3", "-o", self.path(name)])
            self.assertEqual(code, 0)
        self.assertEqual(load_dense(Path(self.path("m.json"))), load_dense(Path(self.path("m.csv"))))

    def test_generate_degenerate_alpha(self):
        code = main(["generate", "-M", "10", "-N", "10", "--alpha", "0", "-U", "2",
                     "-o", self.path("m.csem")])
        self.assertEqual(code, 2)

    def test_usage_error_exits_with_one(self):
        with self.assertRaises(SystemExit) as cm:
            main(["generate", "--bogus"])
        self.assertEqual(cm.exception.code, 1)
        with self.assertRaises(SystemExit) as cm:
            main([])
        self.assertEqual(cm.exception.code, 1)

    def test_extract_roundtrip(self):
        main(["generate", "-M", "40", "-N", "20", "--alpha", "0.5", "-U", "2", "--zero-level",
              "--seed", "1", "-o", self.path("m.csem")])
        code = main(["extract", self.path("m.csem"), "--iterations", "3", "--attempts", "30",
                     "--seed", "2", "-o", self.path("c.csem")])
        self.assertEqual(code, 0)
        c = load_matrix(Path(self.path("c.csem")))
        self.assertIsInstance(c, CompressedMatrix)
        self.assertGreater(c.n_cse, 0)
        self.assertEqual(decode(c), load_dense(Path(self.path("m.csem"))))

    def test_extract_flags_override_settings(self):
        save_dense(WORKED, Path(self.path("m.json")))
        configs = []

        def recording(m, cfg, on_attempt=None):
            configs.append(cfg)
            return run_extraction(m, cfg, on_attempt)

        with mock.patch.multiple(settings, iterations=2, attempts=50, seed=5, early_stop=False,
                                 load_from_file=mock.Mock(return_value=False)), \
                mock.patch("cse_compress.cli.run_extraction", side_effect=recording):
            self.assertEqual(main(["extract", self.path("m.json"), "--attempts", "7", "--early-stop"]), 0)
        self.assertEqual(configs, [ExtractConfig(iterations=2, attempts=7, seed=5, early_stop=True)])

    def test_extract_rejects_compressed_input(self):
        code = main(["extract", self.worked_compressed_file()])
        self.assertEqual(code, 2)

    def test_extract_missing_file(self):
        self.assertEqual(main(["extract", self.path("missing.csem")]), 2)

    def test_multiply_worked_example(self):
        vector = self.dir / "v.txt"
        vector.write_text("1 1 1 1\n", encoding="utf-8")
        code = main(["multiply", self.worked_compressed_file(), str(vector),
                     "--kernel", "cse", "--check", "-o", self.path("y.json")])
        self.assertEqual(code, 0)
        result = json.loads((self.dir / "y.json").read_text(encoding="utf-8"))
        self.assertEqual(result["y"], [3, 3, 8, 7])
        self.assertEqual(result["additions"], 7)
        self.assertEqual(result["multiplications"], 4)
        self.assertEqual(result["check"], "MATCH")

    def test_multiply_dense_json_vector(self):
        save_dense(WORKED, Path(self.path("m.json")))
        vector = self.dir / "v.json"
        vector.write_text("[1, 2, 3, 4]", encoding="utf-8")
        code = main(["multiply", self.path("m.json"), str(vector), "--kernel", "csr",
                     "-o", self.path("y.json")])
        self.assertEqual(code, 0)
        result = json.loads((self.dir / "y.json").read_text(encoding="utf-8"))
        self.assertEqual(result["y"], [5, 5, 26, 22])
        self.assertEqual(result["additions"], 8)

    def test_multiply_errors(self):
        short = self.dir / "short.txt"
        short.write_text("1,1,1", encoding="utf-8")
        self.assertEqual(main(["multiply", self.worked_compressed_file(), str(short)]), 2)

        save_dense(WORKED, Path(self.path("m.csv")))
        ones = self.dir / "ones.txt"
        ones.write_text("1,1,1,1", encoding="utf-8")
        self.assertEqual(main(["multiply", self.path("m.csv"), str(ones), "--kernel", "cse"]), 2)

    def test_inspect(self):
        reports = []

        def recording(c, e_original=None):
            report = storage_report(c, e_original)
            reports.append(report)
            return report

        with mock.patch("cse_compress.cli.storage_report", side_effect=recording):
            self.assertEqual(main(["inspect", self.worked_compressed_file()]), 0)
        (report,) = reports
        self.assertEqual((report.nnz, report.s_total, report.s_csr), (8, 21, 20))
        self.assertAlmostEqual(report.ratio_vs_csr, 1.05)
        report.check_identities()

    def test_inspect_dense_input(self):
        save_dense(WORKED, Path(self.path("m.json")))
        self.assertEqual(main(["inspect", self.path("m.json")]), 0)

    def test_bench_is_reproducible(self):
        args = ["bench", "--dims", "16x12", "--alpha", "0.25", "0.5", "-U", "2", "4",
                "--repetitions", "2", "--iterations", "2", "--attempts", "10",
                "--seed", "9", "--no-timing", "--quiet"]
        self.assertEqual(main(args + ["-o", self.path("a.csv")]), 0)
        self.assertEqual(main(args + ["-o", self.path("b.csv")]), 0)
        first = (self.dir / "a.csv").read_bytes()
        self.assertEqual(first, (self.dir / "b.csv").read_bytes())
        self.assertEqual(len(first.decode("utf-8").strip().splitlines()), 1 + 8)

    def test_bench_bad_dims(self):
        with self.assertRaises(SystemExit) as cm:
            main(["bench", "--dims", "0x4", "-o", self.path("a.csv")])
        self.assertEqual(cm.exception.code, 1)

    def test_sweep(self):
        code = main(["bench", "--sweep", "-U", "99", "--alpha", "0.1", "0.2",
                     "--quiet", "-o", self.path("sweep.csv")])
        self.assertEqual(code, 0)
        lines = (self.dir / "sweep.csv").read_text(encoding="utf-8").strip().splitlines()
        self.assertEqual(lines[0].split(","), ["rows", "cols", "alpha", "unique_values", "nnz",
                                               "s_dense", "s_csr", "s_total", "csr_efficient",
                                               "crossover"])
        self.assertEqual(lines[1].split(",")[6:8], ["201000", "201000"])

    def test_config_init(self):
        target = self.dir / "settings.toml"
        self.assertEqual(main(["config", "--init", str(target)]), 0)
        with open(target, "rb") as f:
            data = tomllib.load(f)
        self.assertIn("iterations", data["extract"])
        self.assertIn("jobs", data["bench"])


if __name__ == "__main__":
    unittest.main()
