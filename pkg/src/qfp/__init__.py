"""Delay-line clocked AQFP logic: netlists, transient simulation, cell library and analyses."""

__version__ = "0.1.0"
