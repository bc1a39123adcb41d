from neuroaps.cli import main

main(auto_envvar_prefix='NEUROAPS')
