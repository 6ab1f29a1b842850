import jinja2
import logging
import pandas
import sqlalchemy
import threading
from pandas import DataFrame
from pathlib import Path
from sqlalchemy.pool import StaticPool
from typing import Dict, Iterable, List
from repair_agent.ckg.entities import CodeEntity, CodeRelation
log = logging.getLogger(__name__)


SQL_PATH = Path(__file__).absolute().parent / 'sql'



class EntityStore:
    """
    A SQL view of a knowledge graph's entities and relations.

    Attributes:
        url (str):
            SQLite database path.  If omitted, the store lives in memory.

        jinja_environment (jinja2.Environment):
            Jinja configuration object.  Can optionally be overridden.

        sqlalchemy_engine (sqlalchemy.engine.Engine):
            SQLAlchemy engine.

    Note:
        Entity lookup by name and keyword is done in SQL.  Statements are Jinja templates that are
        rendered into pure SQL before execution; user-supplied values travel as bound parameters,
        never through the template.

    Note:
        An in-memory SQLite database exists per connection, so the engine uses a single shared
        connection (`StaticPool`) guarded by a lock.

    References:
        SQLAlchemy engines and connections:
        https://docs.sqlalchemy.org/en/20/core/engines.html
        https://docs.sqlalchemy.org/en/20/core/connections.html

        Jinja API and template syntax:
        https://jinja.palletsprojects.com/en/3.1.x/api/
        https://jinja.palletsprojects.com/en/3.1.x/templates/
    """

    def __init__(self, **args):
        self.url: str = args.get('url')
        self.jinja_environment: jinja2.Environment = args.get('jinja_environment', self._get_default_jinja_environment())
        self.sqlalchemy_engine: sqlalchemy.engine.Engine = self._get_sqlalchemy_engine()
        self._lock = threading.Lock()
        log.debug(f'Constructed new EntityStore!  url = {self.url or ":memory:"}')

    def _get_default_jinja_environment(self) -> jinja2.Environment:
        return jinja2.Environment(trim_blocks=True, lstrip_blocks=True)

    def _get_sqlalchemy_engine(self) -> sqlalchemy.engine.Engine:
        if self.url is None:
            return sqlalchemy.create_engine(
                'sqlite://',
                poolclass=StaticPool,
                connect_args={'check_same_thread': False},
            )
        return sqlalchemy.create_engine(f'sqlite:///{self.url}')

    def load(self, entities: Iterable[CodeEntity], relations: Iterable[CodeRelation]):
        """Replaces the `entities` and `relations` tables with the given records."""
        df_entities = DataFrame(
            [x.to_record() for x in entities],
            columns=['id', 'kind', 'name', 'path', 'start_line', 'end_line', 'signature', 'doc', 'qualname', 'language'],
        )
        df_relations = DataFrame([x.to_record() for x in relations], columns=['src', 'dst', 'kind', 'path', 'line'])
        log.debug(f'Loading {len(df_entities):,} entities and {len(df_relations):,} relations.')
        with self._lock, self.sqlalchemy_engine.begin() as connection:
            df_entities.to_sql('entities', con=connection, index=False, if_exists='replace')
            df_relations.to_sql('relations', con=connection, index=False, if_exists='replace')
            connection.execute(sqlalchemy.text('create index if not exists ix_entities_name on entities (name)'))

    def select(self, sql, jinja_context: Dict = {}, params: Dict = None, quiet: bool = False) -> DataFrame:
        """
        Executes a SQL select statement.

        Args:
            sql (str or Path):
                A SQL statement (or file) to execute.  Bare file names are looked up in the
                package's `sql` directory.

            jinja_context (Dict):
                A dictionary containing all variable names (and values) passed into Jinja template.

            params (Dict):
                Bound parameters referenced as `:name` in the statement.

        Returns:
            DataFrame:  Contains query result.
        """

        # If SQL path was given, get file content.
        if isinstance(sql, Path):
            with open(sql if sql.is_absolute() else SQL_PATH / sql, 'r') as file:
                sql = file.read()

        # Render Jinja template into pure SQL.
        sql = self._render(sql, jinja_context)

        # Log.
        if not quiet:
            log.debug(f'Executing SQL...\n{sql}')

        # Get query result as dataframe.
        with self._lock, self.sqlalchemy_engine.connect() as connection:
            df = pandas.read_sql(sqlalchemy.text(sql), connection, params=params or {})

        # Log, return.
        if not quiet:
            log.debug(f'Done with row count = {len(df):,}.')
        return df

    def _render(self, sql: str, jinja_context: Dict) -> str:
        """Uses Jinja to render the SQL template into pure SQL."""
        return self.jinja_environment.from_string(sql).render(**jinja_context)

    def ids_by_name(self, names: List[str], case_sensitive: bool = True, kinds: List[str] = None) -> DataFrame:
        """Returns `(id, name, kind)` rows of entities whose name is one of `names`."""
        if not names:
            return DataFrame(columns=['id', 'name', 'kind'])
        return self.select(
            Path('select_by_name.sql'),
            jinja_context={'names': names, 'case_sensitive': case_sensitive, 'kinds': kinds},
            params={f'name_{i}': x for i, x in enumerate(names)},
            quiet=True,
        )

    def ids_by_keyword(self, keywords: List[str]) -> DataFrame:
        """Returns `(id, name, kind)` rows of entities whose lower-cased name contains any keyword."""
        if not keywords:
            return DataFrame(columns=['id', 'name', 'kind'])
        return self.select(
            Path('select_by_keyword.sql'),
            jinja_context={'keywords': keywords},
            params={f'keyword_{i}': '%' + _escape_like(x.lower()) + '%' for i, x in enumerate(keywords)},
            quiet=True,
        )

    def summary(self) -> DataFrame:
        """Entity counts per kind."""
        return self.select(Path('select_summary.sql'), quiet=True)


def _escape_like(text: str) -> str:
    return text.replace('\\', '\\\\').replace('%', '\\%').replace('_', '\\_')
