from typing import Optional


class SleuthError(Exception):
    """Base for every failure a sleuth command can report."""


# --- workbook files ---
class SwtFormatError(SleuthError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateCellError(SwtFormatError):
    pass


class SheetExistsError(SleuthError):
    pass


class UnknownSheetError(SleuthError):
    pass


class UnknownWorkbookError(SleuthError):
    pass


class UnknownNameError(SleuthError):
    pass


# --- formulas ---
class FormulaSyntaxError(SleuthError):
    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"at offset {offset}: {message}")


class ReferenceOutOfGridError(SleuthError):
    pass


# --- areas ---
class NotUniformError(SleuthError):
    def __init__(self, address: str):
        self.address = address
        super().__init__(f"formula at {address} is not a fill of the area's top-left formula")


class NonFormulaCellError(SleuthError):
    def __init__(self, address: str):
        self.address = address
        super().__init__(f"cell {address} does not hold a formula")


class UnclassifiableAreaError(SleuthError):
    pass


# --- registry ---
class OverlapError(SleuthError):
    pass


class CapacityExceededError(SleuthError):
    pass


class TooManyReferencesError(SleuthError):
    pass


class MixedContentError(SleuthError):
    pass


class InvalidBoundsError(SleuthError):
    pass


class UnknownEntryError(SleuthError):
    pass


class UnknownGroupError(SleuthError):
    pass


class ShapeIncompatibleError(SleuthError):
    pass


class VersionMismatchError(SleuthError):
    pass


class CorruptWatchfileError(SleuthError):
    pass


class ModeError(SleuthError):
    pass


class LockError(SleuthError):
    pass


# --- structural edits ---
class AnchorOutsideGroupError(SleuthError):
    pass


class WouldEmptyAreaError(SleuthError):
    pass


class GuardDeletionError(SleuthError):
    pass


class DestinationCollisionError(SleuthError):
    pass


class UnwatchedSourceError(SleuthError):
    pass


class IrreparableEntryError(SleuthError):
    pass


class EditScriptError(SleuthError):
    def __init__(self, line: int, message: str, command: Optional[str] = None):
        self.line = line
        self.command = command
        super().__init__(f"line {line}: {message}")


# --- evaluation / tracing ---
class CycleError(SleuthError):
    pass


class UnsupportedFunctionError(SleuthError):
    pass


class ShapeMismatchError(SleuthError):
    pass


class NotAFormulaError(SleuthError):
    pass
