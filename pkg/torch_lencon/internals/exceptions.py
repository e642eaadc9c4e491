from typing import Optional


class InputValidationError(ValueError):
    pass


class ShapeError(InputValidationError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        desc = " vs ".join(str(list(s)) for s in self.shapes)
        super().__init__(f"`{op}` got incompatible shapes: {desc}.")


class NonFiniteError(InputValidationError):
    pass


class CorpusFormatError(InputValidationError):
    def __init__(self, message: str, path: Optional[str] = None, line_no: Optional[int] = None):
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        super().__init__(where + message)


class CheckpointFormatError(InputValidationError):
    pass


class VariantMismatchError(InputValidationError):
    pass


class AlignmentError(InputValidationError):
    pass


class DecodingError(RuntimeError):
    pass


class EmptyBeamError(DecodingError):
    pass


class StepCapError(DecodingError):
    pass


class NonFiniteLossError(FloatingPointError):
    pass
