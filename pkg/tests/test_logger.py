"""
Tests for the console formatter and the training record log.
"""

import logging

from bendr.app.core.logger import ShortNameFormatter, get_training_logger


def make_record(name, level=logging.INFO, message="hello"):
    return logging.LogRecord(name, level, __file__, 1, message, None, None)


class TestShortNameFormatter:

    def test_package_prefixes_are_stripped(self):
        formatter = ShortNameFormatter("%(name)s|%(message)s", use_colors=False)
        assert formatter.short_name("bendr.app.core.pretrain.loop") == "pretrain.loop"
        assert formatter.short_name("bendr.commands.common") == "common"
        assert formatter.short_name("numpy") == "numpy"

    def test_fixed_width_name_column(self):
        formatter = ShortNameFormatter("%(name)s|%(message)s", use_colors=False)
        line = formatter.format(make_record("bendr.app.core.model.checkpoint"))
        name, message = line.split("|")
        assert name == "[model.checkpoint]".ljust(ShortNameFormatter.NAME_WIDTH)
        assert message == "hello"

    def test_colors_and_original_record(self):
        formatter = ShortNameFormatter("%(levelname)s %(name)s", use_colors=True)
        record = make_record("bendr.manage", level=logging.WARNING)
        assert formatter.format(record).startswith("\033[33mWARNING\033[0m")
        assert record.levelname == "WARNING"
        assert record.name == "bendr.manage"


class TestTrainingLog:

    def test_appends_bare_lines(self, tmp_path):
        path = tmp_path / "logs" / "training.log"
        get_training_logger(path).info("1\t0.001\t3.0\t0.1")
        get_training_logger(path).info("2\t0.002\t2.5\t0.2")
        assert path.read_text(encoding="utf-8").splitlines() == ["1\t0.001\t3.0\t0.1", "2\t0.002\t2.5\t0.2"]

    def test_redirects_to_new_path(self, tmp_path):
        get_training_logger(tmp_path / "a.log").info("first")
        logger = get_training_logger(tmp_path / "b.log")
        logger.info("second")
        assert len(logger.handlers) == 1
        assert (tmp_path / "a.log").read_text(encoding="utf-8") == "first\n"
        assert (tmp_path / "b.log").read_text(encoding="utf-8") == "second\n"
        assert not logger.propagate
