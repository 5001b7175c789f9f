#!/usr/bin/env python3
"""Writes the SMF fixtures byte by byte. Golden tables sit next to them."""
import pathlib
import struct

HERE = pathlib.Path(__file__).parent


def header(fmt, ntracks, division):
    return b"MThd" + struct.pack(">IHHH", 6, fmt, ntracks, division)


def track(body):
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


END = [0x00, 0xFF, 0x2F, 0x00]

# Format 0, division 480: one C4 held for a quarter.
single = header(0, 1, 480) + track([
    0x00, 0x90, 60, 100,
    0x83, 0x60, 0x80, 60, 64,  # delta 480
] + END)

# Format 0, division 480: two overlapping C4s on channel 0, running status
# after the first note-on, both offs as velocity-0 note-ons.
fifo = header(0, 1, 480) + track([
    0x00, 0x90, 60, 100,
    0x81, 0x70, 60, 90,        # delta 240, running status
    0x81, 0x70, 60, 0,         # delta 240 -> tick 480, velocity-0 off
    0x81, 0x70, 60, 0,         # tick 720
] + END)

# Format 1, division 96, three tracks.
#   track 0: 3/4 at 0, tempo, 6/8 at tick 288
#   track 1: channel 0 melody with running status and an explicit 0x80 off
#   track 2: channel 1 bass plus one channel 2 note, a sysex between them
conductor = track([
    0x00, 0xFF, 0x58, 0x04, 3, 2, 24, 8,
    0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,
    0x82, 0x20, 0xFF, 0x58, 0x04, 6, 3, 24, 8,  # delta 288
] + END)
melody = track([
    0x00, 0x90, 72, 80,
    0x60, 72, 0,               # delta 96, running status off
    0x00, 76, 80,              # tick 96
    0x30, 0x80, 76, 0,         # delta 48 -> tick 144, explicit note-off
    0x00, 0x90, 79, 80,
    0x81, 0x50, 79, 0,         # delta 208 -> tick 352
] + END)
bass = track([
    0x00, 0x91, 48, 70,
    0x81, 0x40, 0x81, 48, 0,   # delta 192, explicit off
    0x00, 0xF0, 0x03, 0x7E, 0x00, 0xF7,
    0x00, 0x92, 43, 70,        # fresh status after sysex, channel 2
    0x60, 0x92, 43, 0,         # tick 288
    0x00, 0x91, 50, 70,
    0x60, 0x81, 50, 64,        # tick 384
] + END)
format1 = header(1, 3, 96) + conductor + melody + bass

# Format 0, division 4: a note never switched off and a zero-length note.
dangling = header(0, 1, 4) + track([
    0x00, 0x90, 64, 100,
    0x00, 0x90, 67, 100,
    0x00, 0x80, 67, 0,         # same tick as its note-on
    0x08, 0xFF, 0x2F, 0x00,    # end of track at tick 8; 64 still sounding
])

# Format 2 is rejected.
format2 = header(2, 1, 96) + track(END)

for name, data in {
    "single_note.mid": single,
    "fifo_running_status.mid": fifo,
    "format1_multitrack.mid": format1,
    "dangling_notes.mid": dangling,
    "format2.mid": format2,
}.items():
    (HERE / name).write_bytes(data)
