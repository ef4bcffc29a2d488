"""Flat parameter vectors with named, shaped segments."""

from __future__ import annotations

import numpy as np


class LayoutError(ValueError):
    """Raised when parameter layouts do not line up."""


class ParamLayout:
    """Maps segment names to (offset, shape) slices of a flat vector."""

    def __init__(self, entries):
        self.entries = [(name, tuple(shape)) for name, shape in entries]
        self._offsets = {}
        off = 0
        for name, shape in self.entries:
            if name in self._offsets:
                raise LayoutError(f"duplicate segment name {name!r}")
            size = int(np.prod(shape)) if shape else 1
            self._offsets[name] = (off, shape, size)
            off += size
        self.size = off

    def names(self):
        return [name for name, _ in self.entries]

    def slot(self, name):
        return self._offsets[name]

    def __eq__(self, other):
        return isinstance(other, ParamLayout) and self.entries == other.entries

    def __contains__(self, name):
        return name in self._offsets

    @staticmethod
    def concat(*layouts, prefixes=None):
        entries = []
        for k, layout in enumerate(layouts):
            prefix = "" if prefixes is None else prefixes[k]
            entries.extend((prefix + name, shape) for name, shape in layout.entries)
        return ParamLayout(entries)


class ParamVector:
    """Flat float64 array viewed through a ParamLayout."""

    def __init__(self, layout, data=None):
        self.layout = layout
        if data is None:
            data = np.zeros(layout.size)
        data = np.asarray(data, dtype=np.float64)
        if data.shape != (layout.size,):
            raise LayoutError(
                f"data length {data.shape} does not match layout size {layout.size}"
            )
        self.data = data

    def view(self, name):
        """Writable array view of one segment, reshaped to its layout shape."""
        off, shape, size = self.layout.slot(name)
        return self.data[off : off + size].reshape(shape)

    def copy(self):
        return ParamVector(self.layout, self.data.copy())

    def unpack(self):
        return {name: self.view(name).copy() for name in self.layout.names()}

    @staticmethod
    def pack(layout, segments):
        pv = ParamVector(layout)
        for name in layout.names():
            pv.view(name)[...] = segments[name]
        return pv

    @staticmethod
    def zeros_like(other):
        return ParamVector(other.layout)

    def __len__(self):
        return self.data.shape[0]
