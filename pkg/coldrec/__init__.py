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

'''
.. include:: ../README.md
.. include:: ../VERSION.md
.. include:: ../ROADMAP.md
'''

__docformat__ = 'google'
__version__ = '0.1.0'


from coldrec.errors import ColdrecError, ConfigError, DataError, NumericalError
from coldrec.sparse import SparseVector, ItemFeatureMatrix, PreferenceData, ProfileCache
from coldrec.fbsm import FbsmModel, TripletWorkspace
from coldrec.baselines import CosimScorer, LinearSimilarityModel
# modules importing the model modules
from coldrec.evaluator import EvalReport, evaluate
from coldrec.trainer import TrainConfig, TrainingLog, train
from coldrec.dataio import VocabularyMap, ItemSplit
from coldrec.settings import RunConfig
