"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
to distinct process exit statuses.
"""


class QuadCoarseError(Exception):
    exit_code = 1


class ParseError(QuadCoarseError):
    exit_code = 10


class NonManifold(QuadCoarseError):
    exit_code = 11


class NonQuad(QuadCoarseError):
    exit_code = 12


class InvalidSpec(QuadCoarseError):
    exit_code = 13


class NoSeeds(QuadCoarseError):
    exit_code = 20


class NonQuadPatch(QuadCoarseError):
    exit_code = 21


class TooLarge(QuadCoarseError):
    exit_code = 30


class Infeasible(QuadCoarseError):
    exit_code = 31


class TopologyCollapse(QuadCoarseError):
    exit_code = 40


class DisconnectedPath(QuadCoarseError):
    exit_code = 41


class DegenerateEdge(QuadCoarseError):
    exit_code = 50


class IoError(QuadCoarseError):
    exit_code = 60
