#!/usr/bin/env python3
"""Convert DEAP preprocessed-python files (sXX.dat) to EEGR recordings.

Writes <out>/sXX/vNN.eegr for each of the 40 trials, keeping the 32 EEG
channels (the first 32 rows, already in the built-in montage order).
"""

import argparse
import pathlib
import pickle
import struct

import numpy as np

CHANNELS = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz", "Pz",
    "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
]
SAMPLE_RATE = 128.0


def write_eegr(path, samples):
    samples = np.ascontiguousarray(samples, dtype="<f4")
    with open(path, "wb") as out:
        out.write(b"EEGR")
        out.write(struct.pack("<HdIQ", 1, SAMPLE_RATE, samples.shape[0], samples.shape[1]))
        for name in CHANNELS:
            out.write(name.encode("ascii") + b"\0")
        out.write(samples.tobytes())


def convert(dat, out_root):
    with open(dat, "rb") as f:
        data = pickle.load(f, encoding="latin1")["data"]
    participant = out_root / dat.stem
    participant.mkdir(parents=True, exist_ok=True)
    for trial in range(data.shape[0]):
        write_eegr(participant / f"v{trial + 1:02d}.eegr", data[trial, : len(CHANNELS), :])
    return data.shape[0]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("inputs", nargs="+", type=pathlib.Path, help="sXX.dat files")
    parser.add_argument("--out", type=pathlib.Path, required=True, help="recordings directory")
    args = parser.parse_args()
    for dat in args.inputs:
        print(f"{dat.stem}: {convert(dat, args.out)} trials")


if __name__ == "__main__":
    main()
