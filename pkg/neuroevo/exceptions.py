# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

"""Exceptions raised by the evolution engine and its numerical core."""


class NeuroevoException(Exception):
    """Base exception.

    Subclasses define ``msg_fmt``, formatted with the keyword arguments
    given at raise time. The keyword arguments stay available as
    attributes so callers can inspect them.
    """

    msg_fmt = 'An unknown error occurred.'

    def __init__(self, message=None, **kwargs):
        self.kwargs = kwargs
        for name, value in kwargs.items():
            setattr(self, name, value)
        if not message:
            try:
                message = self.msg_fmt % kwargs
            except KeyError:
                message = self.msg_fmt
        super(NeuroevoException, self).__init__(message)


class InvalidGenome(NeuroevoException):
    msg_fmt = 'Genome %(key)s is invalid: %(reason)s'


class PopulationTooSmall(NeuroevoException):
    msg_fmt = ('Tournament selection needs at least 2 individuals, '
               'got %(size)d')


class ShapeMismatch(NeuroevoException):
    msg_fmt = 'Shape mismatch: %(reason)s'


class Diverged(NeuroevoException):
    msg_fmt = 'Training diverged (non-finite loss) in epoch %(epoch)d'


class DatasetFormatError(NeuroevoException):
    msg_fmt = 'Malformed dataset file %(path)s: %(reason)s'


class InvalidManifest(NeuroevoException):
    msg_fmt = 'Invalid run manifest: %(reason)s'


class CorruptRunState(NeuroevoException):
    msg_fmt = 'Run state in %(path)s is unusable: %(reason)s'


class ManifestMismatch(NeuroevoException):
    msg_fmt = ('Manifest %(path)s does not match the one the run was '
               'started with (expected sha256 %(expected)s, got %(actual)s)')


class CheckpointFormatError(NeuroevoException):
    msg_fmt = 'Malformed checkpoint: %(reason)s'
