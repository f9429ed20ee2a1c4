#!/usr/bin/env python
#
# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"Implements the main entry point and option parser for the besstat application"

import os
import sys
import json
import logging
import argparse

from .commands import Commands, plain
from .config import ConfigError, parse_config
from .statistics import DegeneracyError

from importlib.metadata import version


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DEGENERATE = 2
EXIT_FAILURE = 3


class ArgumentParser(argparse.ArgumentParser):
    "Raises :exc:`ConfigError` instead of exiting on bad arguments"
    def error(self, message):
        raise ConfigError(message)


class BesstatApplication:
    """
    Evaluates Berry-Esseen bounds for smooth nonlinear statistics, measures
    the true distances to normality by simulation, and runs the
    verification suites of the inequalities behind the bounds. Everything
    about a run comes from the JSON configuration file; the flags only
    override its seed, worker count and output directory.
    """
    def __init__(self):
        super().__init__()
        self.version = version(__package__)
        self.parser = ArgumentParser(description=self.__doc__)
        self.parser.add_argument(
            '--version', action='version', version=self.version)
        self.parser.add_argument(
            '--config', metavar='PATH', required=True,
            help="The JSON run configuration")
        self.parser.add_argument(
            '--seed', metavar='INT', type=int, default=None,
            help="Override the configuration's seed (an unsigned 64-bit "
            "integer)")
        self.parser.add_argument(
            '--workers', metavar='N', type=int, default=None,
            help="Override the number of simulation worker processes; "
            "results do not depend on it")
        self.parser.add_argument(
            '--out', metavar='DIR', default=None,
            help="Override the output directory (default: $BESSTAT_OUTPUT "
            "or ./besstat-out)")

    def __call__(self, args=None):
        try:
            self.debug = int(os.environ['DEBUG'])
        except (KeyError, ValueError):
            self.debug = 0
        logging_conf = {
            'format': '%(asctime)s %(name)-30s %(levelname)-10s %(message)s'
        }
        if self.debug:
            logging_conf['level'] = logging.DEBUG
            debug_out = os.environ.get('DEBUG_OUT', '/tmp/besstat.log')
            if debug_out == '-':
                logging_conf['stream'] = sys.stderr
            else:
                logging_conf['filename'] = debug_out
        else:
            logging_conf['level'] = logging.CRITICAL
        logging.basicConfig(**logging_conf)
        logging.getLogger('besstat').setLevel(logging_conf['level'])
        logging.getLogger('sqlalchemy.engine').setLevel(logging_conf['level'])

        try:
            conf = self.parser.parse_args(args)
            config = parse_config(conf.config).override(
                seed=conf.seed, workers=conf.workers, out=conf.out)
            return Commands(config).dispatch()
        except Exception as e:
            if not self.debug:
                print(str(e), file=sys.stderr, flush=True)
                if isinstance(e, ConfigError):
                    return EXIT_CONFIG
                elif isinstance(e, DegeneracyError):
                    print(json.dumps(plain(e.report.as_dict()), indent=2),
                          flush=True)
                    return EXIT_DEGENERATE
                return EXIT_FAILURE
            elif self.debug == 1:
                logging.getLogger('besstat').exception('fatal error')
                raise
            else:
                import pdb
                pdb.post_mortem()
                return EXIT_FAILURE


main = BesstatApplication()
