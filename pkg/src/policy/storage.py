import logging
from pathlib import Path

import numpy as np
import pandas as pd

from model.parameters import SystemParams
from model.states import StateSpace
from policy.policies import Policy, PolicyViolation, validate
from utils.exceptions import PolicyFormatError

POLICY_COLUMNS = ['q', 'c_t', 'c_l', 'g1', 'g2', 'g3', 'g4']


def _describe(violation: PolicyViolation) -> str:
    decision = "" if violation.k is None else f" k={violation.k}"
    return f"{violation.kind} at {violation.state}{decision} ({violation.value:.6g})"


class PolicyStorage:
    """Policy tables on disk: one CSV record per state, probabilities at 17 significant digits"""

    def save(self, policy: Policy, path) -> None:
        space = policy.space
        frame = pd.DataFrame({
            'q': space.q,
            'c_t': space.c_t,
            'c_l': space.c_l,
            'g1': policy.table[:, 0],
            'g2': policy.table[:, 1],
            'g3': policy.table[:, 2],
            'g4': policy.table[:, 3],
        }, columns=POLICY_COLUMNS)
        try:
            frame.to_csv(path, index=False, float_format='%.17g')
            logging.info(f"Policy '{policy.name}' saved to {path}")
        except OSError as e:
            logging.error(f"Error saving policy to {path}: {e}")
            raise

    def load(self, path, params: SystemParams, name=None) -> Policy:
        """Read a policy CSV; states absent from the file stay idle (g4 = 1)"""
        space = StateSpace.from_params(params)
        try:
            frame = pd.read_csv(path, dtype={'q': int, 'c_t': int, 'c_l': int},
                                float_precision='round_trip')
        except (OSError, ValueError) as e:
            logging.error(f"Error loading policy from {path}: {e}")
            raise PolicyFormatError(f"cannot read policy file {path}: {e}")

        if list(frame.columns) != POLICY_COLUMNS:
            raise PolicyFormatError(f"policy header must be {','.join(POLICY_COLUMNS)}, "
                                    f"got {','.join(map(str, frame.columns))}")

        table = np.zeros((space.size, 4))
        table[:, 3] = 1.0
        seen = set()
        for record in frame.itertuples(index=False):
            state = (record.q, record.c_t, record.c_l)
            try:
                s = space.index(state)
            except IndexError:
                raise PolicyFormatError(f"policy row for state {state} is outside the state space")
            if s in seen:
                raise PolicyFormatError(f"duplicate policy row for state {state}")
            seen.add(s)
            table[s] = (record.g1, record.g2, record.g3, record.g4)

        if len(seen) < space.size:
            logging.info(f"{space.size - len(seen)} states missing from {path}; defaulting to idle")
        policy = Policy(space=space, table=table, name=name or Path(path).stem)

        violations = validate(policy, params)
        if violations:
            listed = "; ".join(_describe(v) for v in violations[:10])
            more = f" and {len(violations) - 10} more" if len(violations) > 10 else ""
            logging.error(f"Policy file {path} is not a valid policy: {listed}{more}")
            raise PolicyFormatError(f"invalid policy in {path}: {listed}{more}")
        return policy


policy_storage = PolicyStorage()
