"""Simulated external memory of a trusted execution environment

Every cell access made through an `ExternalArray` is appended to the access
trace of its `ExternalMemory`. The trace holds the kind of access, the array
and the index; it never holds the payload, which models the encryption of the
untrusted memory.
"""
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, List, NamedTuple, Optional, Union

logger = logging.getLogger(__name__)

READ = "read"
WRITE = "write"

DEFAULT_MEMORY_CONSTANT = 64


class BoundsException(IndexError):
    pass


class AccessEvent(NamedTuple):
    seq: int
    kind: str
    array_id: str
    index: int

    def to_line(self) -> str:
        return f"{self.seq},{self.kind},{self.array_id},{self.index}"

    @classmethod
    def from_line(cls, line: str) -> "AccessEvent":
        seq, kind, array_id, index = line.split(",")
        if kind not in (READ, WRITE):
            raise ValueError(f"Unknown access kind: {kind}")
        return cls(int(seq), kind, array_id, int(index))


@dataclass
class AccessTrace:
    """The ordered access pattern of one run as seen by the adversary.

    `length` always counts every access; `events` is empty when the memory was
    created with `keep_events=False`.
    """

    events: List[AccessEvent] = field(default_factory=list)
    length: int = 0

    def __len__(self):
        return self.length

    def dumps(self) -> str:
        return "".join(event.to_line() + "\n" for event in self.events)

    @classmethod
    def loads(cls, text: str) -> "AccessTrace":
        events = [AccessEvent.from_line(line) for line in text.splitlines() if line]
        return cls(events=events, length=len(events))

    def write(self, path: Union[str, Path]) -> None:
        with open(path, "w") as file:
            file.write(self.dumps())

    @classmethod
    def read(cls, path: Union[str, Path]) -> "AccessTrace":
        with open(path) as file:
            return cls.loads(file.read())

    def first_divergence(self, other: "AccessTrace") -> Optional[int]:
        """Position of the first event that differs, None for equal traces.

        Sequence numbers take part in the comparison, a shorter trace diverges
        at the position where it ends.
        """
        for position, (mine, theirs) in enumerate(zip(self.events, other.events)):
            if mine != theirs:
                return position
        if len(self.events) != len(other.events) or self.length != other.length:
            return min(len(self.events), len(other.events))
        return None


class PrivateMemoryMeter:
    """Tracks the words held in private memory by a running algorithm

    The meter is advisory: exceeding the capacity logs a warning and is
    visible through `exceeded`, it never aborts the run.
    """

    def __init__(self, capacity_words: int):
        if capacity_words < 1:
            raise ValueError("capacity_words must be positive")
        self.capacity_words = capacity_words
        self.current_words = 0
        self.peak_words = 0

    @classmethod
    def for_size(cls, n: int, constant: float = DEFAULT_MEMORY_CONSTANT):
        """A meter with capacity constant * (ln n)^2 words"""
        log_n = math.log(max(n, 2))
        return cls(math.ceil(constant * log_n * log_n))

    @property
    def exceeded(self) -> bool:
        return self.peak_words > self.capacity_words

    @contextmanager
    def hold(self, words: int):
        self.current_words += words
        if self.current_words > self.peak_words:
            self.peak_words = self.current_words
            if self.peak_words > self.capacity_words:
                logger.warning(
                    "Private memory use %d exceeds capacity of %d words",
                    self.peak_words,
                    self.capacity_words,
                )
        try:
            yield
        finally:
            self.current_words -= words


class ExternalArray:
    def __init__(self, memory: "ExternalMemory", array_id: str, cells: List[Any]):
        self.memory = memory
        self.array_id = array_id
        self._cells = cells

    def __len__(self):
        return len(self._cells)

    @property
    def length(self) -> int:
        return len(self._cells)

    def read(self, index: int) -> Any:
        self._check_bounds(index)
        self.memory._record(READ, self.array_id, index)
        return self._cells[index]

    def write(self, index: int, payload: Any) -> None:
        self._check_bounds(index)
        self.memory._record(WRITE, self.array_id, index)
        self._cells[index] = payload

    def snapshot(self) -> List[Any]:
        """Copy of the cells that bypasses the trace, for inspection outside the adversary model"""
        return list(self._cells)

    def _check_bounds(self, index: int) -> None:
        if not 0 <= index < len(self._cells):
            raise BoundsException(
                f"Index {index} out of bounds for array {self.array_id} of length {len(self._cells)}"
            )


class ExternalMemory:
    """Untrusted memory holding named arrays and recording every access to them"""

    def __init__(
        self, *, meter: Optional[PrivateMemoryMeter] = None, keep_events: bool = True
    ):
        self.meter = meter if meter is not None else PrivateMemoryMeter(2 ** 62)
        self.keep_events = keep_events
        self.arrays = {}
        self._events: List[AccessEvent] = []
        self._seq = 0

    def allocate(
        self,
        array_id: str,
        length: int = 0,
        *,
        fill: Any = None,
        cells: Optional[Iterable[Any]] = None,
    ) -> ExternalArray:
        """Creates an array, either `length` cells of `fill` or the given `cells`

        Initial contents are placed by the data owner and are not traced.
        """
        if array_id in self.arrays:
            raise ValueError(f"Array {array_id} already exists")
        if "," in array_id:
            raise ValueError("Array ids must not contain commas")
        if cells is None:
            initial = [fill] * length
        else:
            initial = list(cells)
        array = ExternalArray(self, array_id, initial)
        self.arrays[array_id] = array
        return array

    def free(self, array: ExternalArray) -> None:
        del self.arrays[array.array_id]

    def capture(self) -> AccessTrace:
        """Returns the trace recorded so far and resets the recorder"""
        trace = AccessTrace(events=self._events, length=self._seq)
        self._events = []
        self._seq = 0
        return trace

    def _record(self, kind: str, array_id: str, index: int) -> None:
        if self.keep_events:
            self._events.append(AccessEvent(self._seq, kind, array_id, index))
        self._seq += 1


def capture_trace(memory: ExternalMemory, run: Callable[[], Any]) -> AccessTrace:
    """Runs `run` against `memory` and returns exactly the accesses it made"""
    memory.capture()
    run()
    return memory.capture()
