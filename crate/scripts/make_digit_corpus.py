#!/usr/bin/env python3
"""Synthesize a small spoken-digit corpus with eSpeak NG.

Clips are named `<digit>_<speaker>_<index>.wav` (the Free Spoken Digit
Dataset convention) and split into train/ and test/ by index.

    pip install espeakng-loader numpy
    python3 scripts/make_digit_corpus.py crates/core/tests/data/digits
"""
import ctypes
import sys
import wave
from pathlib import Path

import espeakng_loader
import numpy as np

WORDS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]
VOICES = ["en", "en-US", "en-029", "en-GB-scotland", "en-GB-x-rp", "en-GB-x-gbclan",
          "en-GB-x-gbcwmd", "en-US-nyc"]
VARIANTS = ["m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "f1", "f2", "f3", "f4", "f5",
            "adam", "anika", "belinda", "david", "john", "linda", "max"]
PER_CLASS = 50
N_TRAIN = 40
SEED = 20240611

AUDIO_OUTPUT_SYNCHRONOUS = 2
RATE, PITCH = 1, 3


def main(out_dir: Path) -> None:
    lib = ctypes.cdll.LoadLibrary(espeakng_loader.get_library_path())
    sample_rate = lib.espeak_Initialize(
        AUDIO_OUTPUT_SYNCHRONOUS, 0, espeakng_loader.get_data_path().encode(), 0)
    buf = []

    callback_t = ctypes.CFUNCTYPE(
        ctypes.c_int, ctypes.POINTER(ctypes.c_short), ctypes.c_int, ctypes.c_void_p)

    @callback_t
    def on_audio(wav, n, _events):
        if wav and n > 0:
            buf.extend(wav[:n])
        return 0

    lib.espeak_SetSynthCallback(on_audio)
    rng = np.random.default_rng(SEED)

    for split in ("train", "test"):
        (out_dir / split).mkdir(parents=True, exist_ok=True)

    for digit, word in enumerate(WORDS):
        for idx in range(PER_CLASS):
            voice = VOICES[rng.integers(len(VOICES))]
            variant = VARIANTS[rng.integers(len(VARIANTS))]
            lib.espeak_SetVoiceByName(f"{voice}+{variant}".encode())
            lib.espeak_SetParameter(RATE, int(rng.integers(130, 211)), 0)
            lib.espeak_SetParameter(PITCH, int(rng.integers(25, 76)), 0)
            buf.clear()
            text = word.encode()
            lib.espeak_Synth(text, len(text) + 1, 0, 0, 0, 0, None, None)
            lib.espeak_Synchronize()

            speech = np.asarray(buf, dtype=np.float64) / 32768.0
            peak = np.max(np.abs(speech)) or 1.0
            speech *= rng.uniform(0.35, 0.9) / peak
            lead = np.zeros(int(rng.uniform(0.0, 0.08) * sample_rate))
            tail = np.zeros(int(rng.uniform(0.0, 0.05) * sample_rate))
            clip = np.concatenate([lead, speech, tail])
            clip += rng.normal(0.0, 10 ** (-50 / 20), clip.size)
            pcm = np.clip(np.round(clip * 32767.0), -32768, 32767).astype("<i2")

            speaker = (voice + variant).replace("-", "").lower()
            split = "train" if idx < N_TRAIN else "test"
            path = out_dir / split / f"{digit}_{speaker}_{idx}.wav"
            with wave.open(str(path), "wb") as w:
                w.setnchannels(1)
                w.setsampwidth(2)
                w.setframerate(sample_rate)
                w.writeframes(pcm.tobytes())


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "digits"))
