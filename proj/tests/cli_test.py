# Copyright 2026 The Psycal Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the psycal command-line tool.

Usage: cli_test.py PATH_TO_PSYCAL [unittest args]
"""

import csv
import json
import math
import os
import struct
import subprocess
import sys
import tempfile
import unittest
import wave

BIN = None


def run(*args, env=None, cwd=None):
    full_env = dict(os.environ)
    full_env.pop("PSYCAL_OUT_DIR", None)
    if env:
        full_env.update(env)
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True,
                          env=full_env, cwd=cwd)


def run_json(*args, **kw):
    r = run(*args, **kw)
    if r.returncode != 0:
        raise AssertionError(f"exit {r.returncode}: {r.stderr}")
    return json.loads(r.stdout)


def write_pcm16(path, samples, rate=44100):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(b"".join(
            struct.pack("<h", max(-32768, min(32767, round(x * 32768)))) for x in samples))


def tone(n, hz, amp, rate=44100):
    return [amp * math.sin(2 * math.pi * hz * t / rate) for t in range(n)]


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class CliTest(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.dir, name)

    def test_help_and_usage_errors(self):
        self.assertEqual(run("--help").returncode, 0)
        self.assertEqual(run().returncode, 1)
        self.assertEqual(run("frobnicate").returncode, 1)
        self.assertEqual(run("loss", self.path("only_one.wav")).returncode, 1)

    def test_toy_is_deterministic_given_seed(self):
        for name, seed in (("a.wav", 4), ("b.wav", 4), ("c.wav", 5)):
            self.assertEqual(run("toy", self.path(name), "--seconds", 0.2, "--seed", seed)
                             .returncode, 0)
        data = []
        for name in ("a.wav", "b.wav", "c.wav"):
            with open(self.path(name), "rb") as f:
                data.append(f.read())
        self.assertEqual(data[0], data[1])
        self.assertNotEqual(data[0], data[2])

    def test_analyze_sine_has_one_tonal_masker_per_frame(self):
        # 32 + 8 * 480 samples: eight frames, none of them zero-padded.
        write_pcm16(self.path("sine.wav"), tone(3872, 1000.0, 0.5))
        out = self.path("out")
        summary = run_json("analyze", self.path("sine.wav"), "--out-dir", out)
        rows = read_csv(os.path.join(out, "sine_maskers.csv"))
        tonal = [r for r in rows if r["kind"] == "tonal"]
        frames = summary["frames"]
        self.assertEqual(len(tonal), frames)
        self.assertEqual(sorted(int(r["frame"]) for r in tonal), list(range(frames)))
        for r in tonal:
            self.assertAlmostEqual(float(r["hz"]), 1000.0, delta=44100 / 512)

    def test_analyze_silence_mask_is_threshold_in_quiet(self):
        write_pcm16(self.path("quiet.wav"), [0.0] * 1500)
        out = self.path("out")
        run_json("analyze", self.path("quiet.wav"), "--out-dir", out)
        rows = read_csv(os.path.join(out, "quiet_pam.csv"))
        self.assertGreater(len(rows), 0)
        for r in rows:
            self.assertEqual(float(r["mask_db"]), float(r["ath_db"]))

    def test_analyze_malformed_wav_leaves_no_outputs(self):
        with open(self.path("bad.wav"), "wb") as f:
            f.write(b"RIFF\x10\x00\x00\x00WAVEjunkjunk")
        out = self.path("out")
        r = run("analyze", self.path("bad.wav"), "--out-dir", out)
        self.assertEqual(r.returncode, 2)
        self.assertIn("bad.wav", r.stderr)
        self.assertFalse(os.path.exists(out) and os.listdir(out))

    def test_svg_does_not_change_numbers(self):
        write_pcm16(self.path("sine.wav"), tone(2000, 440.0, 0.3))
        run_json("analyze", self.path("sine.wav"), "--out-dir", self.path("plain"))
        run_json("analyze", self.path("sine.wav"), "--out-dir", self.path("plot"), "--svg")
        for name in ("sine_pam.csv", "sine_maskers.csv"):
            with open(os.path.join(self.path("plain"), name)) as a, \
                    open(os.path.join(self.path("plot"), name)) as b:
                self.assertEqual(a.read(), b.read())
        with open(os.path.join(self.path("plot"), "sine_frame0.svg")) as f:
            self.assertTrue(f.read().startswith("<svg"))

    def test_out_dir_defaults_to_environment(self):
        write_pcm16(self.path("sine.wav"), tone(1000, 440.0, 0.3))
        env_dir = self.path("from_env")
        run_json("analyze", self.path("sine.wav"), env={"PSYCAL_OUT_DIR": env_dir})
        self.assertTrue(os.path.exists(os.path.join(env_dir, "sine_pam.csv")))

    def test_loss_identical_files_are_zero(self):
        run("toy", self.path("t.wav"), "--seconds", 0.1)
        report = run_json("loss", self.path("t.wav"), self.path("t.wav"), "--preset", "model-d")
        for term in ("l1", "l2", "l3", "l4", "total"):
            self.assertEqual(report["aggregate"][term], 0.0)
        self.assertTrue(report["pam_computed"])
        report = run_json("loss", self.path("t.wav"), self.path("t.wav"), "--preset", "model-a")
        self.assertFalse(report["pam_computed"])
        self.assertEqual(report["terms"], ["l1"])

    def test_loss_masked_noise_has_no_l4(self):
        ref = tone(3000, 1000.0, 0.5)
        noise = tone(3000, 1050.0, 0.002)
        write_pcm16(self.path("ref.wav"), ref)
        write_pcm16(self.path("test.wav"), [a + b for a, b in zip(ref, noise)])
        report = run_json("loss", self.path("ref.wav"), self.path("test.wav"))
        self.assertEqual(report["aggregate"]["l4"], 0.0)
        self.assertGreater(report["aggregate"]["l1"], 0.0)

    def test_loss_rejects_mismatched_rates(self):
        write_pcm16(self.path("a.wav"), [0.0] * 1000, rate=44100)
        write_pcm16(self.path("b.wav"), [0.0] * 1000, rate=48000)
        r = run("loss", self.path("a.wav"), self.path("b.wav"))
        self.assertEqual(r.returncode, 2)

    def test_quantize_reports_consistent_rates(self):
        run("toy", self.path("t.wav"), "--seconds", 0.2)
        q = run_json("quantize", self.path("t.wav"), "--kernels", 16)
        self.assertEqual(len(q["kernels"]), 16)
        h = q["hard_entropy_bits"]
        self.assertGreaterEqual(q["huffman_mean_code_length"], h)
        self.assertLess(q["huffman_mean_code_length"], h + 1)
        self.assertAlmostEqual(q["bitrate_lower_bound_bps"], h * q["feature_rate"], places=6)

    def test_codec_encode_decode_reencode(self):
        run("toy", self.path("t.wav"), "--seconds", 0.25, "--seed", 2)
        ckpt = self.path("m.ckpt")
        run_json("train", self.path("t.wav"), "--checkpoint", ckpt, "--epochs", 2,
                 "--batch", 8, "--modules", 2, "--out-dir", self.dir)
        self.assertTrue(os.path.exists(self.path("m_train.csv")))
        first = run_json("codec", "encode", self.path("t.wav"), "--checkpoint", ckpt,
                         "--out", self.path("a.psyb"))
        run_json("codec", "decode", self.path("a.psyb"), "--checkpoint", ckpt,
                 "--out", self.path("d.wav"))
        run_json("codec", "encode", self.path("t.wav"), "--checkpoint", ckpt,
                 "--out", self.path("b.psyb"))
        with open(self.path("a.psyb"), "rb") as a, open(self.path("b.psyb"), "rb") as b:
            self.assertEqual(a.read(), b.read())
        rt = run_json("codec", "roundtrip", self.path("t.wav"), "--checkpoint", ckpt)
        self.assertTrue(rt["reencode_identical"])
        self.assertEqual(rt["payload_bits"], first["payload_bits"])
        self.assertAlmostEqual(rt["measured_kbps"],
                               rt["payload_bits"] / rt["seconds"] / 1000, places=9)
        h = rt["entropy_bits_per_feature"]
        self.assertGreaterEqual(rt["mean_code_length"], h)
        self.assertLess(rt["mean_code_length"], h + 1)
        ratio = rt["measured_kbps"] / rt["lower_bound_kbps"]
        self.assertGreaterEqual(ratio, 1.0)
        self.assertLess(ratio, (h + 1) / h)
        for term in ("l1", "l2", "l3", "l4", "max_nmr"):
            self.assertIn(term, rt)

    def test_codec_truncated_bitstream_fails_cleanly(self):
        run("toy", self.path("t.wav"), "--seconds", 0.1)
        ckpt = self.path("m.ckpt")
        run_json("train", self.path("t.wav"), "--checkpoint", ckpt, "--epochs", 1,
                 "--out-dir", self.dir)
        run_json("codec", "encode", self.path("t.wav"), "--checkpoint", ckpt,
                 "--out", self.path("a.psyb"))
        with open(self.path("a.psyb"), "rb") as f:
            data = f.read()
        with open(self.path("cut.psyb"), "wb") as f:
            f.write(data[:len(data) // 2])
        r = run("codec", "decode", self.path("cut.psyb"), "--checkpoint", ckpt,
                "--out", self.path("x.wav"))
        self.assertEqual(r.returncode, 2)
        self.assertIn("truncated", r.stderr)
        self.assertFalse(os.path.exists(self.path("x.wav")))
        with open(self.path("bad.ckpt"), "wb") as f:
            f.write(b"PSYC\x09\x00\x00\x00")
        r = run("codec", "encode", self.path("t.wav"), "--checkpoint", self.path("bad.ckpt"))
        self.assertEqual(r.returncode, 2)
        self.assertIn("version", r.stderr)

    def test_optimize_zero_steps_returns_degraded(self):
        run("toy", self.path("t.wav"), "--seconds", 0.1)
        s = run_json("optimize", self.path("t.wav"), "--steps", 0, "--out-dir", self.dir)
        self.assertEqual(s["before"], s["after"])
        with open(self.path("t_frame0_optimized.wav"), "rb") as a, \
                open(self.path("t_frame0_degraded.wav"), "rb") as b:
            self.assertEqual(a.read(), b.read())
        self.assertEqual(len(read_csv(self.path("t_frame0_trace.csv"))), 1)

    def test_optimize_model_d_clears_audible_bins(self):
        run("toy", self.path("t.wav"), "--seconds", 0.1, "--seed", 9)
        s = run_json("optimize", self.path("t.wav"), "--steps", 2000, "--snr", 20,
                     "--preset", "model-d", "--out-dir", self.dir)
        self.assertGreater(s["before"]["audible_bins"], 0)
        self.assertEqual(s["after"]["audible_bins"], 0)
        rows = read_csv(self.path("t_frame0_trace.csv"))
        self.assertEqual(len(rows), 2001)
        self.assertEqual(list(rows[0].keys()), ["step", "audible_bins", "max_nmr", "total"])

    def test_optimize_is_deterministic_given_seed(self):
        run("toy", self.path("t.wav"), "--seconds", 0.1)
        a = run_json("optimize", self.path("t.wav"), "--steps", 50, "--seed", 3,
                     "--out-dir", self.path("a"))
        b = run_json("optimize", self.path("t.wav"), "--steps", 50, "--seed", 3,
                     "--out-dir", self.path("b"))
        self.assertEqual(a, b)

    def test_allocate_respects_budget(self):
        run("toy", self.path("t.wav"), "--seconds", 0.1)
        a = run_json("allocate", self.path("t.wav"), "--budget", 30, "--out-dir", self.dir)
        self.assertLessEqual(a["bits_used"], 30)
        self.assertEqual(a["bits_used"], sum(a["bits_per_band"]))
        trace = a["nmr_trace_db"]
        self.assertTrue(all(x >= y for x, y in zip(trace, trace[1:])))
        r = run("allocate", self.path("t.wav"), "--frame", 999)
        self.assertEqual(r.returncode, 1)


if __name__ == "__main__":
    BIN = os.path.abspath(sys.argv.pop(1))
    unittest.main()
