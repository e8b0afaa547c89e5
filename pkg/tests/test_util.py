"""Tests for all util functions."""
import unittest

from pydantic import ValidationError

from vocalfold.ann import TrainConfig
from vocalfold.util import (
    EmptyUi,
    EncodingError,
    ExceptionInfo,
    TempDir,
    TrainingDiverged,
    VocalfoldBaseException,
)


class Utiltests(unittest.TestCase):
    """Tests for the util functions."""

    def test_exception_info_package_error(self):
        """Package exceptions keep their message and detail."""
        info = ExceptionInfo.from_exception(EncodingError("Bad file.", detail=["line 3", "line 4"]))
        self.assertEqual(info, ExceptionInfo(type="EncodingError", message="Bad file.", detail=["line 3", "line 4"]))

    def test_exception_info_validation_error(self):
        """Validation errors are summarized as strings."""
        try:
            TrainConfig(epochs=0)
        except ValidationError as e:
            info = ExceptionInfo.from_exception(e)
        self.assertEqual(info.type, "ValidationError")
        self.assertIsInstance(info.detail, str)

    def test_exception_info_other_error(self):
        """Other exceptions carry their traceback."""
        info = ExceptionInfo.from_exception(ZeroDivisionError("division by zero"))
        self.assertEqual(info.type, "ZeroDivisionError")
        self.assertEqual(info.message, "Unknown exception occurred.")
        self.assertIsInstance(info.detail, list)

    def test_training_diverged(self):
        error = TrainingDiverged("Loss is nan.", epoch=12)
        self.assertIsInstance(error, VocalfoldBaseException)
        self.assertEqual((error.message, error.epoch, error.detail), ("Loss is nan.", 12, None))

    def test_empty_ui(self):
        ui = EmptyUi()
        ui.start_task("folds", 3)
        ui.advance("folds")
        ui.finish_task("folds")

    def test_temp_dir(self):
        """Temporary folders are removed on exit."""
        with TempDir() as folder:
            self.assertTrue(folder.is_dir())
            (folder / "file").write_text("x")
        self.assertFalse(folder.exists())


if __name__ == "__main__":
    unittest.main()
