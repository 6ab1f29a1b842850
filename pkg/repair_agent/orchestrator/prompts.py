import jinja2
import logging
from pathlib import Path
from typing import Dict, List
from repair_agent.orchestrator.providers import CompletionRequest
from repair_agent.orchestrator.roles import AgentRole
log = logging.getLogger(__name__)


TEMPLATE_PATH = Path(__file__).parent / 'templates'



class PromptLibrary:
    """
    Renders role prompts from the jinja templates shipped with the package.

    `system.j2` holds the instructions of every role; `<role>.j2` renders the task the role sees.
    Templates can be overridden by pointing `template_path` at another directory with the same
    file names.
    """

    def __init__(self, **args):
        self.template_path: Path = Path(args.get('template_path', TEMPLATE_PATH))
        self.jinja_environment = jinja2.Environment(
            loader=jinja2.FileSystemLoader(self.template_path), trim_blocks=True, lstrip_blocks=True,
            keep_trailing_newline=True,
        )

    def render(self, name: str, **context) -> str:
        return self.jinja_environment.get_template(name).render(**context)

    def request(self, role: AgentRole, history: List[Dict[str, str]] = None, **context) -> CompletionRequest:
        role = AgentRole(role)
        system = self.render('system.j2', role=role.value, **context)
        user = self.render(f'{role.value.lower()}.j2', **context)
        return CompletionRequest(role, system, user, list(history or []))
