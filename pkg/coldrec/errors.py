# MIT License
# 
# Copyright (c) 2023 coldrec contributors
# 
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
# 
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
# 
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

'''Exception types raised by coldrec.

Each exception derives from the builtin exception a caller would expect to catch (*ValueError* for bad configuration and bad data, *ArithmeticError* for numerical failures) and carries the process exit code used by the command line interface.

| Exit code | Meaning |
| -------- | -------- |
| 0 | Success |
| 1 | Usage or configuration error |
| 2 | Data error (parse, format, dimension, split) |
| 3 | Numerical failure (divergence, gradient check) |
'''

__docformat__ = 'google'


class ColdrecError(Exception):
    '''Base class of all coldrec errors.'''
    exit_code = 1


class ConfigError(ColdrecError, ValueError):
    '''Invalid configuration value, unknown configuration key, or unsupported request.'''
    exit_code = 1


class DataError(ColdrecError, ValueError):
    '''Input data is missing, malformed, or inconsistent.'''
    exit_code = 2


class ParseError(DataError):
    '''Malformed line in an input file.

    Attributes:
        path (str): File being parsed, or None
        line_number (int): 1-based line number of the offending line, or None
    '''

    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number

        if line_number is not None:
            message = '{}:{}: {}'.format(path if path is not None else '<input>', line_number, message)

        super().__init__(message)


class EmptyDataError(DataError):
    '''Input file contains no usable records.'''


class PipelineError(DataError):
    '''Feature pipeline produced an unusable result (ex. empty vocabulary).'''


class SplitError(DataError):
    '''Item split cannot be produced as requested.'''


class FormatError(DataError):
    '''Model or manifest file has the wrong container format, version, or dimensions.'''


class DimensionError(DataError):
    '''Vector, matrix, or model dimensions do not agree.'''


class NumericalError(ColdrecError, ArithmeticError):
    '''Numerical failure.'''
    exit_code = 3


class DivergenceError(NumericalError):
    '''A model parameter became non-finite during training.'''


class WorkspaceError(NumericalError):
    '''Cached triplet quantities no longer match the model parameters.'''


class GradientCheckError(NumericalError):
    '''Analytic gradients or the fast path disagree with their oracles.'''
