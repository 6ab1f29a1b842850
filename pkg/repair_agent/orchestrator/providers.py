import logging
import os
import random
import re
import requests
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional
from repair_agent.config import DEFAULTS, RunConfig
from repair_agent.errors import ConfigError, ProviderError
from repair_agent.orchestrator.roles import AgentRole
log = logging.getLogger(__name__)


SECTION_HEADER = re.compile(r'^###[ \t]+(' + '|'.join(x.value for x in AgentRole) + r')[ \t]*$', re.MULTILINE)

TRANSIENT_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})



@dataclass
class CompletionRequest:
    """
    One provider call.

    Attributes:
        role (AgentRole):
            The agent asking.

        system (str):
            Role instructions.

        context (str):
            The rendered task:  issue, retrieved code, feedback.

        history (List[Dict[str, str]]):
            Earlier turns of the same role, as `{'role': 'user' | 'assistant', 'content': ...}`.
    """
    role: AgentRole
    system: str
    context: str
    history: List[Dict[str, str]] = field(default_factory=list)

    def messages(self) -> List[Dict[str, str]]:
        return [{'role': 'system', 'content': self.system}, *self.history, {'role': 'user', 'content': self.context}]


def estimate_tokens(text: str) -> int:
    """Rough token count, about four characters per token."""
    return max(1, len(text or '') // 4)



class CompletionProvider:
    """
    Turns a completion request into text.

    Attributes:
        tokens_used (int):
            Prompt plus completion tokens consumed so far.
    """

    def __init__(self):
        self.tokens_used: int = 0
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        raise NotImplementedError

    def _charge(self, tokens: int):
        with self._lock:
            self.tokens_used += tokens



class HttpCompletionProvider(CompletionProvider):
    """
    A chat-completions endpoint over HTTP.

    The request body is `{"model": ..., "messages": [...]}` and the reply is read from
    `choices[0].message.content`, with token usage from `usage.total_tokens` when present.

    Attributes:
        endpoint (str):
            Full URL of the chat-completions resource.

        model (str):
            Model name sent with each request.

        api_key (str):
            Bearer token.  Optional.

        timeout (float):
            Seconds per HTTP attempt.

        max_attempts (int):
            Attempts per completion, counting the first.

        delay (float):
            Base delay of the exponential backoff, in seconds.
    """

    def __init__(self, **args):
        super().__init__()
        self.endpoint: str = args.get('endpoint')
        self.model: str = args.get('model', DEFAULTS['provider_model'])
        self.api_key: Optional[str] = args.get('api_key')
        self.timeout: float = args.get('timeout', DEFAULTS['provider_timeout'])
        self.max_attempts: int = args.get('max_attempts', DEFAULTS['provider_max_attempts'])
        self.delay: float = args.get('delay', DEFAULTS['provider_delay'])
        self.session: requests.Session = args.get('session') or requests.Session()
        if not self.endpoint:
            raise ConfigError('The HTTP provider needs provider_endpoint.')
        log.info(f'Constructed new HttpCompletionProvider!  endpoint = {self.endpoint}, model = {self.model}')

    def complete(self, request: CompletionRequest) -> str:
        log.debug(f'Requesting completion for {request.role.value}, messages = {len(request.messages())}')
        body = self._retry(self.max_attempts, self.delay, self._post, payload={'model': self.model, 'messages': request.messages()})
        try:
            text = body['choices'][0]['message']['content']
        except (KeyError, IndexError, TypeError) as e:
            raise ProviderError(f'Unexpected completion response:  {str(body)[:200]}') from e
        usage = (body.get('usage') or {}).get('total_tokens')
        self._charge(int(usage) if usage else estimate_tokens(''.join(x['content'] for x in request.messages()) + text))
        return text or ''

    def _post(self, payload: Dict) -> Dict:
        headers = {'Content-Type': 'application/json'}
        if self.api_key:
            headers['Authorization'] = f'Bearer {self.api_key}'
        response = self.session.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def _retry(self, max_attempts: int, delay: float, func: Callable, **args) -> Any:
        """
        Repeatedly attempts a request.  Each retry is delayed.

        Note:
            Only transient failures are retried:  connection errors, timeouts, and the status
            codes in `TRANSIENT_STATUS` (rate limits and server errors).  Anything else, e.g. an
            authentication failure, raises immediately.

        References:
            Exponential backoff and jitter:
            https://aws.amazon.com/blogs/architecture/exponential-backoff-and-jitter/
        """

        def is_transient(e):
            if isinstance(e, (requests.ConnectionError, requests.Timeout)):
                return True
            if isinstance(e, requests.HTTPError) and e.response is not None:
                return e.response.status_code in TRANSIENT_STATUS
            return False

        for i in range(max_attempts):
            try:
                return func(**args)
            except requests.RequestException as e:
                if is_transient(e) and i < max_attempts - 1:
                    sleep_time = min(60, delay * (2 ** i))
                    sleep_time *= random.uniform(0.5, 1)
                    log.exception(f'Will try again in {sleep_time:0.1f} seconds...')
                    time.sleep(sleep_time)
                else:
                    raise ProviderError(f'Completion request failed:  {e}') from e
            except ValueError as e:
                raise ProviderError(f'Completion response is not JSON:  {e}') from e



class ScriptedProvider(CompletionProvider):
    """
    Replays canned completions from a plain-text script.  No network is used.

    The script is split into sections by header lines of the form `### <Role>`, e.g.
    `### Programmer`.  Each section is one completion; sections of the same role are returned in
    order, one per request from that role.  Text before the first header is ignored.

    Attributes:
        responses (Dict[AgentRole, List[str]]):
            Remaining completions per role.

        requests (List[CompletionRequest]):
            Every request received, in order.

    Note:
        A request from a role with no remaining completion raises `ProviderError`.
    """

    def __init__(self, **args):
        super().__init__()
        text = args.get('text')
        if text is None:
            path = Path(args.get('path'))
            if not path.is_file():
                raise ConfigError(f'Replay script not found:  {path}.')
            text = path.read_text(encoding='utf-8')
        self.responses: Dict[AgentRole, List[str]] = parse_script(text)
        self.requests: List[CompletionRequest] = []
        log.info(f'Constructed new ScriptedProvider!  responses = {({k.value: len(v) for k, v in self.responses.items()})}')

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.requests.append(request)
            queue = self.responses.get(request.role, [])
            if not queue:
                raise ProviderError(f'Replay script has no more completions for {request.role.value}.')
            text = queue.pop(0)
        self._charge(estimate_tokens(''.join(x['content'] for x in request.messages()) + text))
        return text


def parse_script(text: str) -> Dict[AgentRole, List[str]]:
    """Splits a replay script into completions per role."""
    responses: Dict[AgentRole, List[str]] = {}
    headers = list(SECTION_HEADER.finditer(text))
    for i, header in enumerate(headers):
        role = AgentRole(header.group(1))
        end = headers[i + 1].start() if i + 1 < len(headers) else len(text)
        responses.setdefault(role, []).append(text[header.end():end].strip('\n') + '\n')
    return responses


def create_provider(config: RunConfig) -> CompletionProvider:
    """The replay provider when `replay_script` is set, otherwise the HTTP provider."""
    if config.replay_mode:
        return ScriptedProvider(path=config.replay_script)
    return HttpCompletionProvider(
        endpoint=config.provider_endpoint,
        model=config.provider_model,
        api_key=os.environ.get(config.provider_api_key_env),
        timeout=config.provider_timeout,
        max_attempts=config.provider_max_attempts,
        delay=config.provider_delay,
    )
