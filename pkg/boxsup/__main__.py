from boxsup.main import main

main()
