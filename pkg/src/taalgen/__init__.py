"""taalgen: desk-scale music generation toolkit.

Symbolic pipeline: MIDI files -> note/chord tokens -> recurrent or
transformer next-token models -> MIDI.  Audio pipeline: WAV ->
normalized log-mel frames -> recurrent or transformer next-frame
models -> Griffin-Lim -> WAV.  Everything runs on a small reverse-mode
autodiff engine with a finite-difference gradient oracle.
"""

__version__ = "0.1.0"
