from setuptools import setup

setup(
    name='repair_agent',
    version='1.0',
    packages=['repair_agent'],
    package_data={'repair_agent': ['*', '*/*', '*/*/*']},
    python_requires='>=3.9',
    install_requires=[
        'jinja2',
        'networkx',
        'pandas',
        'pathspec',
        'PyYAML',
        'requests',
        'SQLAlchemy',
        'tree-sitter>=0.22',
        'tree-sitter-go',
        'tree-sitter-python',
    ],
    entry_points={'console_scripts': ['repair-agent=repair_agent.cli:main']},
)
