import logging
import pandas
from enum import Enum
from pandas import DataFrame
from typing import Dict, List, Tuple, Union
from repair_agent.errors import PermissionDenied
log = logging.getLogger(__name__)



class AgentRole(str, Enum):
    SEARCHER = 'Searcher'
    PLANNER = 'Planner'
    REPRODUCER = 'Reproducer'
    PROGRAMMER = 'Programmer'
    TESTER = 'Tester'
    EDITOR = 'Editor'


class Tool(str, Enum):
    CKG = 'CKG'
    LSP = 'LSP'
    GENERAL_FILE_INDEXING = 'GeneralFileIndexing'
    GENERAL_BASH_COMMAND = 'GeneralBashCommand'
    CODE_EDITING = 'CodeEditing'
    RESET_REPOSITORY = 'ResetRepository'
    REPRODUCTION_SCRIPT_EXECUTION = 'ReproductionScriptExecution'


RETRIEVAL_TOOLS = (Tool.CKG, Tool.LSP, Tool.GENERAL_FILE_INDEXING, Tool.GENERAL_BASH_COMMAND)

# Tool support of agent tasks.  Every role but the Editor may retrieve; only the Programmer and the
# Editor edit; only the Programmer resets; only the Reproducer and the Tester run reproductions.
_GRANTS = {
    AgentRole.SEARCHER: RETRIEVAL_TOOLS,
    AgentRole.PLANNER: RETRIEVAL_TOOLS,
    AgentRole.REPRODUCER: RETRIEVAL_TOOLS + (Tool.REPRODUCTION_SCRIPT_EXECUTION,),
    AgentRole.PROGRAMMER: RETRIEVAL_TOOLS + (Tool.CODE_EDITING, Tool.RESET_REPOSITORY),
    AgentRole.TESTER: RETRIEVAL_TOOLS + (Tool.REPRODUCTION_SCRIPT_EXECUTION,),
    AgentRole.EDITOR: (Tool.CODE_EDITING,),
}



class ToolPermissionMatrix:
    """
    Which role may use which tool.

    Attributes:
        grants (Dict[Tuple[AgentRole, Tool], bool]):
            One entry per (role, tool) pair, 42 in total.
    """

    def __init__(self, grants: Dict[Tuple[AgentRole, Tool], bool] = None):
        if grants is None:
            grants = {(r, t): t in _GRANTS[r] for r in AgentRole for t in Tool}
        missing = {(r, t) for r in AgentRole for t in Tool} - set(grants)
        if missing:
            raise ValueError(f'Permission matrix is missing {len(missing)} pair(s).')
        self.grants: Dict[Tuple[AgentRole, Tool], bool] = dict(grants)

    def allows(self, role: Union[AgentRole, str], tool: Union[Tool, str]) -> bool:
        return self.grants[(AgentRole(role), Tool(tool))]

    def tools(self, role: Union[AgentRole, str]) -> List[Tool]:
        return [t for t in Tool if self.allows(role, t)]

    def to_frame(self) -> DataFrame:
        """Tools as rows, roles as columns, booleans as cells."""
        return pandas.DataFrame(
            [[self.allows(r, t) for r in AgentRole] for t in Tool],
            index=[t.value for t in Tool],
            columns=[r.value for r in AgentRole],
        )


DEFAULT_MATRIX = ToolPermissionMatrix()


def enforce(matrix: ToolPermissionMatrix, role: Union[AgentRole, str], tool: Union[Tool, str]) -> bool:
    """
    Checks a tool use against the matrix.

    Returns:
        bool:  True when allowed.

    Raises:
        PermissionDenied:  Carries the role and the tool.
    """
    role, tool = AgentRole(role), Tool(tool)
    if not matrix.allows(role, tool):
        log.warning(f'Denied:  {role.value} -> {tool.value}.')
        raise PermissionDenied(role, tool)
    return True
