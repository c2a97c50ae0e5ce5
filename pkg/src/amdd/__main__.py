from amdd.cli import main

main()
