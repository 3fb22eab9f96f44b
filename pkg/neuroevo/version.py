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

"""Versions of the files a run writes and the rules for reading them."""

import functools
import operator
import re


# Formats written by this release. A reader accepts any version with the
# same major number and a minor number not newer than its own.
RUN_STATE_VERSION = '1.0'
CHECKPOINT_VERSION = '1.0'

FORMATS = {
    'run state': RUN_STATE_VERSION,
    'checkpoint': CHECKPOINT_VERSION,
}


@functools.total_ordering
class _Version:
    _version_re = re.compile(r'^(\d+) \. (\d+)$', re.VERBOSE | re.ASCII)

    def __init__(self, version):
        match = self._version_re.match(version)
        if not match:
            raise ValueError('invalid version number %s' % version)
        major, minor = match.group(1, 2)
        self.version = (int(major), int(minor))

    def __str__(self):
        return '.'.join(str(v) for v in self.version)

    @property
    def major(self):
        return self.version[0]

    def __eq__(self, other):
        return self.version == other.version

    def __lt__(self, other):
        return self.version < other.version


def _op(func, b, msg):
    return lambda a: func(_Version(a), _Version(b)) or msg


def le(b):
    msg = 'requires at most version %s' % b
    return _op(operator.le, b, msg)


def same_major(b):
    msg = 'requires major version %s' % _Version(b).major
    return lambda a: _Version(a).major == _Version(b).major or msg


def compare(ver, *predicates):
    """Return True if ``ver`` satisfies all predicates, else an error text."""
    if all(p(ver) is True for p in predicates):
        return True
    err_detail = [p(ver) for p in predicates if p(ver) is not True]
    return 'Unsupported version %s; %s' % (ver, ', and '.join(err_detail))


def check_format(kind, found):
    """Validate the version of a file of the given kind.

    Raises ValueError if a file written with ``found`` cannot be read by
    this release.

    Examples:
        check_format('checkpoint', '1.0') - passes
        check_format('checkpoint', '2.0') - ValueError

    """
    current = FORMATS[kind]
    result = compare(found, same_major(current), le(current))
    if result is not True:
        raise ValueError('%s: %s' % (kind, result))
