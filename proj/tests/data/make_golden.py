"""Writes the golden fixtures in this directory with the struct module."""

import pathlib
import struct

HERE = pathlib.Path(__file__).resolve().parent

RECORDS = [
    # subject, true, disguised, frame (0 onset, 1 apex), embedding
    (7, 2, 4, 1, [0.5, -1.25, 3.0]),
    (300, 0, 5, 0, [1.0, 0.0, -0.125]),
]


def dse1() -> bytes:
    d = len(RECORDS[0][4])
    out = b"DSE1" + struct.pack("<III", 1, len(RECORDS), d)
    for subject, true, disg, frame, emb in RECORDS:
        out += struct.pack("<HBBB3x", subject, true, disg, frame)
        out += struct.pack("<%df" % d, *emb)
    return out


def csv() -> str:
    d = len(RECORDS[0][4])
    lines = ["subject,true_label,disguised_label,frame_type," + ",".join("e%d" % j for j in range(d))]
    for subject, true, disg, frame, emb in RECORDS:
        cells = [str(subject), str(true), str(disg), "apex" if frame else "onset"] + [repr(v) for v in emb]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    (HERE / "golden_2rec.dse").write_bytes(dse1())
    (HERE / "golden_2rec.csv").write_text(csv())
